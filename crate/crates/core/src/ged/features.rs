//! Hand-crafted features for the incremental error detector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::PrefixRow;
use crate::vocab::{BOS, EOS};

pub const FEATURE_VERSION: u32 = 3;

pub const BIAS: usize = 0;
pub const IN_SOURCE: usize = 1;
pub const FRONTIER_MATCH: usize = 2;
pub const COST_DELTA: usize = 3;
/// First of four one-hot plausibility buckets.
pub const BIGRAM_BUCKET: usize = 4;
pub const LENGTH_RATIO: usize = 8;
pub const IS_EOS: usize = 9;
pub const FRONTIER_NEXT_MATCH: usize = 10;
pub const REPEATS_LAST: usize = 11;
/// Character overlap between the candidate and the source token it would
/// replace.
pub const FRONTIER_SIMILARITY: usize = 12;
/// The candidate is seen right before the source frontier token.
pub const BRIDGES_FRONTIER: usize = 13;
/// The frontier token would form an unseen bigram, while the candidate, an
/// inflection of it, forms a seen one.
pub const REPAIRS_INFLECTION: usize = 14;
/// The frontier token would form an unseen bigram, while the candidate
/// joins both sides through seen bigrams.
pub const FILLS_GAP: usize = 15;
/// Copying the frontier token into an unseen bigram.
pub const COPY_UNSEEN: usize = 16;
pub const NUM_FEATURES: usize = 17;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "bias",
    "in_source",
    "frontier_match",
    "cost_delta",
    "bigram_unseen",
    "bigram_rare",
    "bigram_common",
    "bigram_frequent",
    "length_ratio",
    "is_eos",
    "frontier_next_match",
    "repeats_last",
    "frontier_similarity",
    "bridges_frontier",
    "repairs_inflection",
    "fills_gap",
    "copy_unseen",
];

const RARE_BELOW: f64 = 0.05;
const COMMON_BELOW: f64 = 0.3;
const MAX_LENGTH_RATIO: f64 = 3.0;

pub type Features = [f64; NUM_FEATURES];

/// Bigram counts over `<bos>`-padded, `<eos>`-terminated reference
/// sentences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BigramTable {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl BigramTable {
    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for sent in sentences {
            let mut prev = BOS;
            for tok in sent.iter().map(AsRef::as_ref).chain(std::iter::once(EOS)) {
                *counts
                    .entry(prev.to_string())
                    .or_default()
                    .entry(tok.to_string())
                    .or_default() += 1;
                prev = tok;
            }
        }
        Self { counts }
    }

    pub fn count(&self, prev: &str, next: &str) -> u64 {
        self.counts
            .get(prev)
            .and_then(|row| row.get(next))
            .copied()
            .unwrap_or(0)
    }

    /// Relative frequency of `next` after `prev`; 0 for unseen contexts.
    pub fn relative(&self, prev: &str, next: &str) -> f64 {
        match self.counts.get(prev) {
            Some(row) => {
                let total: u64 = row.values().sum();
                row.get(next).copied().unwrap_or(0) as f64 / total as f64
            }
            None => 0.0,
        }
    }

    /// Bucket 0 for unseen pairs, then rare, common and frequent.
    pub fn bucket(&self, prev: &str, next: &str) -> usize {
        if self.count(prev, next) == 0 {
            return 0;
        }
        let r = self.relative(prev, next);
        if r < RARE_BELOW {
            1
        } else if r < COMMON_BELOW {
            2
        } else {
            3
        }
    }
}

/// Incremental view of a prefix against its source: edit distances to
/// every source prefix plus the last emitted token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixView {
    pub row: PrefixRow,
    pub last: String,
    pub len: usize,
}

impl PrefixView {
    pub fn start(source: &[impl AsRef<str>]) -> Self {
        Self {
            row: PrefixRow::new(source.len()),
            last: BOS.to_string(),
            len: 0,
        }
    }

    pub fn push(&self, source: &[impl AsRef<str>], token: &str) -> Self {
        let src: Vec<&str> = source.iter().map(AsRef::as_ref).collect();
        Self {
            row: self.row.extend(&src, &token),
            last: token.to_string(),
            len: self.len + 1,
        }
    }

    pub fn from_prefix(source: &[impl AsRef<str>], prefix: &[impl AsRef<str>]) -> Self {
        prefix
            .iter()
            .fold(Self::start(source), |v, t| v.push(source, t.as_ref()))
    }
}

/// Features of appending `candidate` to the prefix summarized by `view`.
pub fn ged_features(
    source: &[impl AsRef<str>],
    view: &PrefixView,
    candidate: &str,
    bigrams: &BigramTable,
) -> Features {
    let src: Vec<&str> = source.iter().map(AsRef::as_ref).collect();
    let n = src.len();
    let is_eos = candidate == EOS;
    let (frontier, cost) = view.row.frontier();
    let mut f = [0.0; NUM_FEATURES];
    f[BIAS] = 1.0;
    f[IN_SOURCE] = f64::from(src.contains(&candidate));
    let at = |i: usize| if i < n { src[i] } else { EOS };
    f[FRONTIER_MATCH] = f64::from(frontier <= n && at(frontier) == candidate);
    f[FRONTIER_NEXT_MATCH] = f64::from(frontier < n && at(frontier + 1) == candidate);
    let after = if is_eos {
        view.row.values()[n]
    } else {
        view.row.extend(&src, &candidate).frontier().1
    };
    f[COST_DELTA] = (after as f64 - cost as f64).clamp(-2.0, 2.0);
    let bucket = bigrams.bucket(&view.last, candidate);
    f[BIGRAM_BUCKET + bucket] = 1.0;
    f[LENGTH_RATIO] = ((view.len + 1) as f64 / n.max(1) as f64).min(MAX_LENGTH_RATIO);
    f[IS_EOS] = f64::from(is_eos);
    f[REPEATS_LAST] = f64::from(view.last == candidate);
    if !is_eos && frontier < n && at(frontier) != candidate {
        f[FRONTIER_SIMILARITY] = prefix_overlap(at(frontier), candidate);
        f[BRIDGES_FRONTIER] = f64::from(bigrams.count(candidate, at(frontier)) > 0);
        if bigrams.count(&view.last, at(frontier)) == 0 && bucket > 0 {
            f[REPAIRS_INFLECTION] = f64::from(inflects(at(frontier), candidate));
            f[FILLS_GAP] = f[BRIDGES_FRONTIER];
        }
    }
    f[COPY_UNSEEN] = f64::from(f[FRONTIER_MATCH] == 1.0 && bucket == 0);
    f
}

/// One word extends the other.
fn inflects(a: &str, b: &str) -> bool {
    a != b && (a.starts_with(b) || b.starts_with(a))
}

/// Shared leading characters over the longer word's length.
fn prefix_overlap(a: &str, b: &str) -> f64 {
    let shared = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count();
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        shared as f64 / longest as f64
    }
}
