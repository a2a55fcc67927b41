//! Probability vectors over a vocabulary and their entropies.

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Tolerance on the total mass accepted from callers.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Normalized probability vector indexed by token id.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDist {
    probs: Vec<f64>,
}

impl TokenDist {
    /// Validates `probs` (finite, non-negative, mass within 1e-6 of one) and
    /// rescales it so the stored mass is one to rounding.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = checked_mass(&probs)?;
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("mass {sum} is not 1")));
        }
        Ok(Self::rescale(probs, sum))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum = checked_mass(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Ok(Self::rescale(weights, sum))
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    fn rescale(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            for p in &mut probs {
                *p = (*p / sum).min(1.0);
            }
        }
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn log_prob(&self, id: TokenId) -> f64 {
        self.prob(id).ln()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_unchecked(&self.probs)
    }

    /// Entropy divided by `ln |V|`.
    pub fn normalized_entropy(&self) -> Result<f64> {
        let n = self.probs.len();
        if n < 2 {
            return Err(Error::UnsupportedVocabulary(format!(
                "normalized entropy needs at least 2 outcomes, got {n}"
            )));
        }
        Ok((self.entropy() / (n as f64).ln()).clamp(0.0, 1.0))
    }

    /// Ids sorted by probability, highest first; ties go to the lower id.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.probs.len() as u32).map(TokenId).collect();
        ids.sort_by(|a, b| {
            self.probs[b.index()]
                .total_cmp(&self.probs[a.index()])
                .then(a.cmp(b))
        });
        ids
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}

fn checked_mass(probs: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
        }
        sum += p;
    }
    Ok(sum)
}

// Terms are summed in sorted order so the result does not depend on the
// order of the support.
fn entropy_unchecked(probs: &[f64]) -> f64 {
    let mut terms: Vec<f64> = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>().max(0.0)
}

/// `-Σ p ln p` with `0 ln 0 = 0`. Rejects inputs whose mass is off by more
/// than 1e-6.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    let sum = checked_mass(probs)?;
    if (sum - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("mass {sum} is not 1")));
    }
    Ok(entropy_unchecked(probs))
}

/// [`entropy`] divided by its upper bound `ln |V|`, so the result lies in
/// `[0, 1]` whatever the support size.
pub fn normalized_entropy(probs: &[f64]) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::UnsupportedVocabulary(format!(
            "normalized entropy needs at least 2 outcomes, got {}",
            probs.len()
        )));
    }
    Ok((entropy(probs)? / (probs.len() as f64).ln()).clamp(0.0, 1.0))
}
