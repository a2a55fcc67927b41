//! Add-k smoothed conditional tables stored in log domain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model_file::log_prob;
use crate::vocab::TokenId;

/// Smoothed conditional distribution in log domain: explicit entries for
/// observed outcomes, one shared value for the rest of the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub seen: BTreeMap<TokenId, f64>,
    #[serde(with = "log_prob")]
    pub unseen: f64,
}

impl LogRow {
    pub fn uniform(support: usize) -> Self {
        Self {
            seen: BTreeMap::new(),
            unseen: -(support as f64).ln(),
        }
    }

    /// Add-k estimate from counts over a support of `support` outcomes.
    pub fn from_counts(counts: &BTreeMap<TokenId, f64>, support: usize, add_k: f64) -> Self {
        let total: f64 = counts.values().sum();
        let denom = total + add_k * support as f64;
        Self {
            seen: counts
                .iter()
                .map(|(&v, &c)| (v, ((c + add_k) / denom).ln()))
                .collect(),
            unseen: (add_k / denom).ln(),
        }
    }

    /// Explicit distribution; every id in `support` gets its own entry.
    pub fn from_probs(support: impl IntoIterator<Item = TokenId>, probs: &[f64]) -> Self {
        Self {
            seen: support
                .into_iter()
                .zip(probs)
                .map(|(v, &p)| (v, p.ln()))
                .collect(),
            unseen: f64::NEG_INFINITY,
        }
    }

    pub fn prob(&self, v: TokenId) -> f64 {
        self.seen.get(&v).copied().unwrap_or(self.unseen).exp()
    }

    /// Dense probabilities over a vocabulary of `vocab_len`, zero outside
    /// `first..vocab_len`.
    pub fn dense(&self, vocab_len: usize, first: u32) -> Vec<f64> {
        let mut out = vec![0.0; vocab_len];
        let fill = self.unseen.exp();
        for p in &mut out[first as usize..] {
            *p = fill;
        }
        for (&v, &lp) in &self.seen {
            out[v.index()] = lp.exp();
        }
        out
    }

    /// Dense probabilities where only ids accepted by `in_support` carry
    /// mass.
    pub fn dense_where(&self, vocab_len: usize, in_support: impl Fn(TokenId) -> bool) -> Vec<f64> {
        let fill = self.unseen.exp();
        let mut out: Vec<f64> = (0..vocab_len as u32)
            .map(|i| if in_support(TokenId(i)) { fill } else { 0.0 })
            .collect();
        for (&v, &lp) in &self.seen {
            out[v.index()] = lp.exp();
        }
        out
    }
}

/// Conditional table keyed by a context token; unseen contexts use
/// `default`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTable {
    pub rows: BTreeMap<TokenId, LogRow>,
    pub default: LogRow,
}

impl LogTable {
    pub fn row(&self, ctx: TokenId) -> &LogRow {
        self.rows.get(&ctx).unwrap_or(&self.default)
    }

    pub fn prob(&self, ctx: TokenId, v: TokenId) -> f64 {
        self.row(ctx).prob(v)
    }

    pub fn from_counts(
        counts: &BTreeMap<TokenId, BTreeMap<TokenId, f64>>,
        support: usize,
        add_k: f64,
    ) -> Self {
        Self {
            rows: counts
                .iter()
                .map(|(&u, row)| (u, LogRow::from_counts(row, support, add_k)))
                .collect(),
            default: LogRow::uniform(support),
        }
    }
}
