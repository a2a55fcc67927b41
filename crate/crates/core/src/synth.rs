//! A small generated error-correction corpus: subject-verb agreement
//! substitutions and dropped articles over a closed vocabulary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TextPair;
use crate::error::{Error, Result};

const SINGULAR: [&[&str]; 5] = [&["he"], &["she"], &["it"], &["the", "boy"], &["the", "girl"]];
const PLURAL: [&[&str]; 4] = [&["they"], &["we"], &["the", "boys"], &["the", "girls"]];
/// (plural form, singular form)
const VERBS: [(&str, &str); 7] = [
    ("go", "goes"),
    ("like", "likes"),
    ("see", "sees"),
    ("want", "wants"),
    ("eat", "eats"),
    ("need", "needs"),
    ("have", "has"),
];
const NOUNS: [&str; 8] = ["book", "car", "dog", "cat", "house", "ball", "pen", "hat"];
const DETERMINERS: [&str; 2] = ["the", "a"];
const ADVERBS: [&str; 3] = ["today", "now", "again"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub pairs: usize,
    pub seed: u64,
    /// Chance that the verb takes the wrong agreement form.
    pub agreement_rate: f64,
    /// Chance that the object's article is dropped.
    pub deletion_rate: f64,
    pub adverb_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pairs: 600,
            seed: 0,
            agreement_rate: 0.4,
            deletion_rate: 0.3,
            adverb_rate: 0.3,
        }
    }
}

/// Every word the generator can emit.
pub fn lexicon() -> Vec<&'static str> {
    let mut words: Vec<&str> = SINGULAR
        .iter()
        .chain(PLURAL.iter())
        .flat_map(|s| s.iter().copied())
        .chain(VERBS.iter().flat_map(|&(p, s)| [p, s]))
        .chain(NOUNS)
        .chain(DETERMINERS)
        .chain(ADVERBS)
        .chain(["."])
        .collect();
    words.sort_unstable();
    words.dedup();
    words
}

/// Draws `cfg.pairs` (erroneous source, clean target) pairs with ChaCha8
/// seeded from `cfg.seed`. Some sources come out error-free.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<TextPair>> {
    for (name, r) in [
        ("agreement_rate", cfg.agreement_rate),
        ("deletion_rate", cfg.deletion_rate),
        ("adverb_rate", cfg.adverb_rate),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {r}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.pairs);
    for _ in 0..cfg.pairs {
        let plural = rng.gen_bool(0.5);
        let subject: &[&str] = if plural {
            PLURAL.choose(&mut rng).unwrap()
        } else {
            SINGULAR.choose(&mut rng).unwrap()
        };
        let &(base, third) = VERBS.choose(&mut rng).unwrap();
        let det = *DETERMINERS.choose(&mut rng).unwrap();
        let noun = *NOUNS.choose(&mut rng).unwrap();
        let adverb = rng.gen_bool(cfg.adverb_rate).then(|| *ADVERBS.choose(&mut rng).unwrap());

        let (good_verb, bad_verb) = if plural { (base, third) } else { (third, base) };
        let wrong_verb = rng.gen_bool(cfg.agreement_rate);
        let drop_det = rng.gen_bool(cfg.deletion_rate);

        let mut target: Vec<&str> = subject.to_vec();
        let mut source = target.clone();
        target.extend([good_verb, det, noun]);
        source.push(if wrong_verb { bad_verb } else { good_verb });
        if !drop_det {
            source.push(det);
        }
        source.push(noun);
        for s in [&mut source, &mut target] {
            s.extend(adverb);
            s.push(".");
        }
        out.push(TextPair {
            source: source.join(" "),
            target: target.join(" "),
        });
    }
    Ok(out)
}
