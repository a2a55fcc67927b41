//! Independent references for beam search: a seeded table-driven scorer,
//! a plain log-probability beam, and exhaustive enumeration of all outputs.

use std::cmp::Ordering;

use gecdi::critic::Critic;
use gecdi::dist::TokenDist;
use gecdi::error::Result;
use gecdi::scorer::{DynScorer, IncrementalScorer};
use gecdi::vocab::{Sentence, TokenId, Vocabulary};
use rand::Rng;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Scorer whose next-token distribution is a seeded pseudo-random function
/// of (source, prefix). Some tokens get zero mass.
pub struct TableScorer {
    pub vocab: Vocabulary,
    pub seed: u64,
    pub zero_rate: f64,
}

impl TableScorer {
    pub fn new(vocab: Vocabulary, seed: u64) -> Self {
        Self {
            vocab,
            seed,
            zero_rate: 0.0,
        }
    }

    fn weights(&self, source: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &t in source.iter().chain(std::iter::once(&TokenId::BOS)).chain(prefix) {
            h = SplitMix64::seed_from_u64(h ^ u64::from(t.0).wrapping_mul(0x100_0000_01b3)).next_u64();
        }
        let mut rng = SplitMix64::seed_from_u64(h);
        let mut w: Vec<f64> = (0..self.vocab.len())
            .map(|i| {
                let u: f64 = rng.gen_range(0.0..1.0);
                let drop = rng.gen_bool(self.zero_rate);
                if i == 0 || (drop && i != 1) {
                    0.0
                } else {
                    (4.0 * u).exp()
                }
            })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            w[1] = 1.0;
        }
        w
    }
}

#[derive(Clone)]
pub struct TableState {
    source: Vec<TokenId>,
    prefix: Vec<TokenId>,
}

impl IncrementalScorer for TableScorer {
    type State = TableState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init_state(&self, source: &Sentence) -> Result<TableState> {
        Ok(TableState {
            source: source.ids().to_vec(),
            prefix: Vec::new(),
        })
    }

    fn next_dist(&self, s: &TableState) -> Result<TokenDist> {
        TokenDist::from_weights(self.weights(&s.source, &s.prefix))
    }

    fn advance(&self, s: &TableState, token: TokenId) -> Result<TableState> {
        let mut prefix = s.prefix.clone();
        prefix.push(token);
        Ok(TableState {
            source: s.source.clone(),
            prefix,
        })
    }
}

/// Critic together with its weighting, as the oracle sees it.
pub struct OracleCritic<'a> {
    pub critic: &'a dyn Critic,
    pub alpha: f64,
    pub beta: f64,
}

pub fn lambda(alpha: f64, beta: f64, h_model: f64, h_critic: f64) -> f64 {
    alpha * ((beta * h_model + 1.0) / (beta * h_critic + 1.0))
}

/// Fused score of the complete output `y` (ending in `<eos>`), replaying
/// base model and critics token by token.
pub fn fused_sequence_score(
    base: &dyn DynScorer,
    critics: &[OracleCritic<'_>],
    source: &Sentence,
    y: &[TokenId],
) -> f64 {
    let mut bs = base.init_erased(source).unwrap();
    let mut cs: Vec<_> = critics.iter().map(|c| c.critic.start(source).unwrap()).collect();
    let mut total = 0.0;
    for (t, &tok) in y.iter().enumerate() {
        let d = base.next_dist_erased(&bs).unwrap();
        let p = d.prob(tok);
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        let h = d.entropy() / (d.len() as f64).ln();
        let mut step = p.ln();
        for (c, st) in critics.iter().zip(&cs) {
            let j = c.critic.judge(st, &[tok]).unwrap()[0];
            let hc = if j.max_entropy > 0.0 { j.entropy / j.max_entropy } else { 0.0 };
            step -= lambda(c.alpha, c.beta, h, hc) * j.penalty;
        }
        total += step;
        if t + 1 < y.len() {
            bs = base.advance_erased(&bs, tok).unwrap();
            for (c, st) in critics.iter().zip(cs.iter_mut()) {
                *st = c.critic.advance(st, tok).unwrap();
            }
        }
    }
    total
}

/// Every output of at most `cap` tokens over the non-reserved ids plus
/// `<unk>`, each terminated by `<eos>`.
pub fn all_outputs(vocab_len: usize, cap: usize) -> Vec<Vec<TokenId>> {
    let alphabet: Vec<TokenId> = (2..vocab_len as u32).map(TokenId).collect();
    let mut out = vec![vec![TokenId::EOS]];
    let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..cap {
        let mut next = Vec::new();
        for f in &frontier {
            for &a in &alphabet {
                let mut s = f.clone();
                s.push(a);
                let mut done = s.clone();
                done.push(TokenId::EOS);
                out.push(done);
                next.push(s);
            }
        }
        frontier = next;
    }
    out
}

fn better(a: &(f64, Vec<TokenId>), b: &(f64, Vec<TokenId>)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.len().cmp(&b.1.len()))
        .then(a.1.cmp(&b.1))
}

/// Highest fused score over all outputs; returns (tokens without `<eos>`,
/// score).
pub fn exhaustive_argmax(
    base: &dyn DynScorer,
    critics: &[OracleCritic<'_>],
    source: &Sentence,
    cap: usize,
) -> (Vec<TokenId>, f64) {
    let mut scored: Vec<(f64, Vec<TokenId>)> = all_outputs(base.vocabulary().len(), cap)
        .into_iter()
        .map(|y| (fused_sequence_score(base, critics, source, &y), y))
        .filter(|(s, _)| s.is_finite())
        .collect();
    scored.sort_by(better);
    let (s, mut y) = scored.swap_remove(0);
    y.pop();
    (y, s)
}

/// Textbook beam search on summed base log-probabilities.
pub fn vanilla_beam(base: &dyn DynScorer, source: &Sentence, beam: usize, cap: usize) -> (Vec<TokenId>, f64) {
    struct H {
        toks: Vec<TokenId>,
        score: f64,
        state: gecdi::scorer::ErasedState,
    }
    let mut live = vec![H {
        toks: vec![],
        score: 0.0,
        state: base.init_erased(source).unwrap(),
    }];
    let mut done: Vec<(f64, Vec<TokenId>)> = Vec::new();
    while !live.is_empty() && done.len() < beam {
        let mut cands: Vec<(f64, TokenId, usize)> = Vec::new();
        for (pi, h) in live.iter().enumerate() {
            let d = base.next_dist_erased(&h.state).unwrap();
            for (i, &p) in d.probs().iter().enumerate() {
                let tok = TokenId(i as u32);
                let allowed = if h.toks.len() >= cap { tok == TokenId::EOS } else { i != 0 };
                if allowed && p > 0.0 {
                    cands.push((h.score + p.ln(), tok, pi));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(beam);
        let mut next = Vec::new();
        for (s, tok, pi) in cands {
            let mut toks = live[pi].toks.clone();
            if tok == TokenId::EOS {
                done.push((s, toks));
            } else {
                let state = base.advance_erased(&live[pi].state, tok).unwrap();
                toks.push(tok);
                next.push(H { toks, score: s, state });
            }
        }
        live = next;
    }
    done.sort_by(better);
    let (s, y) = done.swap_remove(0);
    (y, s)
}
