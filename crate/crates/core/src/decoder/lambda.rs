//! Entropy-weighted penalty coefficients and fused token scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-critic weighting: `alpha` sets the scale of the penalty, `beta` how
/// strongly the entropy ratio moves it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub alpha: f64,
    pub beta: f64,
    pub enabled: bool,
    /// Number of top base-model candidates handed to the critic per step.
    pub shortlist_n: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            enabled: true,
            shortlist_n: 32,
        }
    }
}

impl CriticConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// The shortlist must cover the beam unless it already spans the whole
    /// vocabulary.
    pub fn validate(&self, beam_width: usize, vocab_len: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.enabled && self.shortlist_n < beam_width.min(vocab_len) {
            return Err(Error::InvalidConfig(format!(
                "shortlist_n {} is below the beam width {beam_width}",
                self.shortlist_n
            )));
        }
        Ok(())
    }
}

/// `alpha * (beta * h_model + 1) / (beta * h_critic + 1)`.
pub fn dynamic_lambda(alpha: f64, beta: f64, h_model: f64, h_critic: f64) -> Result<f64> {
    for h in [h_model, h_critic] {
        if !(h >= 0.0) {
            return Err(Error::InvalidEntropy(h));
        }
    }
    Ok(alpha * ((beta * h_model + 1.0) / (beta * h_critic + 1.0)))
}

/// `logp - sum(lambda * penalty)`.
pub fn fused_token_score(logp: f64, penalties: &[(f64, f64)]) -> f64 {
    logp - penalties.iter().map(|(l, p)| l * p).sum::<f64>()
}
