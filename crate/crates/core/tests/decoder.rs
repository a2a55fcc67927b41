mod support;

use std::sync::Arc;

use gecdi::critic::{Critic, LmCritic};
use gecdi::decoder::{beam_decode, beam_search, trace_tsv, CriticConfig, CriticSlot, DecodeConfig};
use gecdi::error::Error;
use gecdi::exec::Exec;
use gecdi::ged::GedCritic;
use gecdi::scorer::DynScorer;
use gecdi::vocab::{Sentence, TokenId, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::ged_oracle::toy_ged;
use support::search_oracle::{exhaustive_argmax, fused_sequence_score, vanilla_beam, OracleCritic, TableScorer};

fn vocab() -> Vocabulary {
    Vocabulary::from_words(["a", "b", "c"]).unwrap()
}

fn source(v: &Vocabulary, rng: &mut ChaCha8Rng) -> Sentence {
    let n = rng.gen_range(1..=3);
    let ids = (0..n).map(|_| TokenId(rng.gen_range(3..v.len() as u32))).collect();
    Sentence::from_ids(v, ids).unwrap()
}

fn exhaustive_cfg(cap: usize) -> DecodeConfig {
    DecodeConfig {
        beam_width: 2000,
        length_cap: false,
        hard_max_len: cap,
        ..DecodeConfig::default()
    }
}

#[test]
fn disabled_critics_equal_vanilla_beam() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lm_scorer: Arc<dyn DynScorer> = Arc::new(TableScorer::new(v.clone(), 99));
    let lm = LmCritic::new(lm_scorer, &v);
    for inst in 0..40 {
        let mut base = TableScorer::new(v.clone(), inst);
        base.zero_rate = 0.2;
        let x = source(&v, &mut rng);
        let cfg = DecodeConfig {
            beam_width: rng.gen_range(1..5),
            ..DecodeConfig::default()
        };
        let cap = cfg.max_len(x.len());
        let (want, want_score) = vanilla_beam(&base, &x, cfg.beam_width, cap);
        let off = [CriticSlot::new(&lm, CriticConfig::disabled())];
        for critics in [&[][..], &off[..]] {
            let got = beam_decode(&base, critics, &x, &cfg).unwrap();
            assert_eq!(got.tokens, want);
            assert!((got.score - want_score).abs() <= 1e-12);
        }
    }
}

#[test]
fn exhaustive_beam_finds_the_fused_argmax() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ged = GedCritic::new(Arc::new(toy_ged()), &v);
    for inst in 0..10 {
        let base = TableScorer::new(v.clone(), 1000 + inst);
        let lm = LmCritic::new(Arc::new(TableScorer::new(v.clone(), 5000 + inst)), &v);
        let x = source(&v, &mut rng);
        let (a1, b1, a2, b2) = (rng.gen_range(0.1..2.0), rng.gen_range(0.0..10.0), rng.gen_range(0.1..2.0), rng.gen_range(0.0..10.0));
        let slots = [
            CriticSlot::new(&lm, CriticConfig { shortlist_n: v.len(), ..CriticConfig::new(a1, b1) }),
            CriticSlot::new(&ged, CriticConfig { shortlist_n: v.len(), ..CriticConfig::new(a2, b2) }),
        ];
        let oracle = [
            OracleCritic { critic: &lm, alpha: a1, beta: b1 },
            OracleCritic { critic: &ged, alpha: a2, beta: b2 },
        ];
        let cap = 4;
        let got = beam_decode(&base, &slots, &x, &exhaustive_cfg(cap)).unwrap();
        let (want, score) = exhaustive_argmax(&base, &oracle, &x, cap);
        assert_eq!(got.tokens, want);
        assert!((got.score - score).abs() < 1e-10);
    }
}

#[test]
fn trace_sums_to_the_final_score() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ged = GedCritic::new(Arc::new(toy_ged()), &v);
    for inst in 0..20 {
        let base = TableScorer::new(v.clone(), 200 + inst);
        let lm = LmCritic::new(Arc::new(TableScorer::new(v.clone(), 300 + inst)), &v);
        let x = source(&v, &mut rng);
        let cfg = DecodeConfig {
            beam_width: 3,
            trace: true,
            ..DecodeConfig::default()
        };
        let slots = [
            CriticSlot::new(&lm, CriticConfig::new(0.7, 1.0)),
            CriticSlot::new(&ged, CriticConfig::new(0.4, 10.0)),
        ];
        let out = beam_decode(&base, &slots, &x, &cfg).unwrap();
        let steps = out.score_breakdown().unwrap();
        assert_eq!(steps.len(), out.tokens.len() + 1);
        let sum: f64 = steps.iter().map(|r| r.fused).sum();
        assert!((sum - out.score).abs() < 1e-9);
        for r in steps {
            let recomposed = r.base_logp - r.critics.iter().map(|c| c.lambda * c.penalty).sum::<f64>();
            assert!((recomposed - r.fused).abs() < 1e-12);
        }
        let tsv = trace_tsv(steps, &v);
        assert_eq!(tsv.lines().count(), steps.len() + 1);
        assert!(tsv.starts_with("step\ttoken\tbase_logp\tlm_penalty"));
    }
}

#[test]
fn trace_is_unavailable_when_disabled() {
    let v = vocab();
    let base = TableScorer::new(v.clone(), 5);
    let x = v.encode("a b").unwrap();
    let out = beam_decode(&base, &[], &x, &DecodeConfig::default()).unwrap();
    assert!(matches!(out.score_breakdown(), Err(Error::TraceUnavailable)));
}

#[test]
fn empty_source_is_rejected() {
    let v = vocab();
    let base = TableScorer::new(v.clone(), 5);
    let x = Sentence::from_ids(&v, vec![]).unwrap();
    assert!(matches!(
        beam_decode(&base, &[], &x, &DecodeConfig::default()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn intervention_never_raises_a_sequence_score() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ged = GedCritic::new(Arc::new(toy_ged()), &v);
    for inst in 0..20 {
        let base = TableScorer::new(v.clone(), 400 + inst);
        let x = source(&v, &mut rng);
        let out = beam_decode(&base, &[], &x, &DecodeConfig::default()).unwrap();
        let mut y = out.tokens.clone();
        y.push(TokenId::EOS);
        let with = fused_sequence_score(&base, &[OracleCritic { critic: &ged, alpha: 1.0, beta: 1.0 }], &x, &y);
        assert!(with <= out.score + 1e-12);
    }
}

#[test]
fn no_beam_width_beats_the_exhaustive_score() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for inst in 0..20 {
        let base = TableScorer::new(v.clone(), 600 + inst);
        let x = source(&v, &mut rng);
        let best = beam_decode(&base, &[], &x, &exhaustive_cfg(3)).unwrap().score;
        for beam in [1, 2, 4, 8] {
            let cfg = DecodeConfig {
                beam_width: beam,
                ..exhaustive_cfg(3)
            };
            assert!(beam_decode(&base, &[], &x, &cfg).unwrap().score <= best + 1e-12);
        }
    }
}

#[test]
fn parallel_expansion_is_identical() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ged = GedCritic::new(Arc::new(toy_ged()), &v);
    for inst in 0..10 {
        let base = TableScorer::new(v.clone(), 700 + inst);
        let x = source(&v, &mut rng);
        let slots = [CriticSlot::new(&ged as &dyn Critic, CriticConfig::new(0.5, 1.0))];
        let seq = DecodeConfig { beam_width: 4, exec: Exec::Sequential, ..DecodeConfig::default() };
        let par = DecodeConfig { exec: Exec::Parallel, ..seq };
        assert_eq!(
            beam_search(&base, &slots, &x, &seq).unwrap(),
            beam_search(&base, &slots, &x, &par).unwrap()
        );
    }
}

#[test]
fn outputs_respect_the_length_cap() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..30 {
        let mut base = TableScorer::new(v.clone(), 800 + inst);
        base.zero_rate = 0.3;
        let x = source(&v, &mut rng);
        let cfg = DecodeConfig { beam_width: 3, ..DecodeConfig::default() };
        for d in beam_search(&base, &[], &x, &cfg).unwrap() {
            assert!(d.tokens.len() <= (1.8 * x.len() as f64).ceil() as usize);
        }
    }
}
