//! Critics: models consulted during decoding that assign each candidate
//! token a penalty in `[0, 1]` together with the entropy used to weight it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bridge::VocabBridge;
use crate::error::{Error, Result};
use crate::lm::PROB_FLOOR;
use crate::scorer::{DynScorer, ErasedState};
use crate::vocab::{Sentence, TokenId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticKind {
    Lm,
    Ged,
}

impl std::fmt::Display for CriticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CriticKind::Lm => "lm",
            CriticKind::Ged => "ged",
        })
    }
}

/// A critic's verdict on one candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Judgement {
    pub penalty: f64,
    /// Entropy of the critic distribution behind the verdict, in nats.
    pub entropy: f64,
    /// Upper bound of `entropy` (log of the support size).
    pub max_entropy: f64,
}

impl Judgement {
    pub fn normalized_entropy(&self) -> f64 {
        if self.max_entropy > 0.0 {
            self.entropy / self.max_entropy
        } else {
            0.0
        }
    }
}

/// Incremental critic over the base model's vocabulary. States are
/// immutable; `advance` returns a fresh one.
pub trait Critic: Send + Sync {
    fn kind(&self) -> CriticKind;
    fn start(&self, source: &Sentence) -> Result<ErasedState>;
    /// One judgement per candidate, in order.
    fn judge(&self, state: &ErasedState, candidates: &[TokenId]) -> Result<Vec<Judgement>>;
    fn advance(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState>;
}

/// Language-model critic wrapping any incremental scorer. Candidates from
/// the base vocabulary are bridged into the scorer's inventory; a
/// multi-piece candidate is scored by the chain product of its pieces.
pub struct LmCritic {
    scorer: Arc<dyn DynScorer>,
    bridge: VocabBridge,
}

impl LmCritic {
    pub fn new(scorer: Arc<dyn DynScorer>, base_vocab: &Vocabulary) -> Self {
        let bridge = VocabBridge::new(base_vocab, scorer.vocabulary());
        Self { scorer, bridge }
    }

    pub fn scorer(&self) -> &dyn DynScorer {
        self.scorer.as_ref()
    }

    fn pieces(&self, token: TokenId) -> Result<&[TokenId]> {
        if token.index() >= self.bridge.len() {
            return Err(Error::InvalidInput(format!(
                "token {token} outside the base vocabulary"
            )));
        }
        Ok(self.bridge.map(token))
    }

    /// Critic probability of `token` after `state`, floored.
    pub fn prob(&self, state: &ErasedState, token: TokenId) -> Result<f64> {
        let pieces = self.pieces(token)?;
        let mut st = state.clone();
        let mut p = 1.0;
        for (i, &id) in pieces.iter().enumerate() {
            let q = self.scorer.next_dist_erased(&st)?.prob(id);
            p *= q;
            if p == 0.0 {
                break;
            }
            if i + 1 < pieces.len() {
                st = self.scorer.advance_erased(&st, id)?;
            }
        }
        Ok(p.max(PROB_FLOOR))
    }
}

impl Critic for LmCritic {
    fn kind(&self) -> CriticKind {
        CriticKind::Lm
    }

    fn start(&self, source: &Sentence) -> Result<ErasedState> {
        let mut ids = Vec::new();
        for &t in source.ids() {
            ids.extend_from_slice(self.pieces(t)?);
        }
        let bridged = Sentence::new(self.scorer.vocabulary(), ids, source.raw().to_string())?;
        self.scorer.init_erased(&bridged)
    }

    fn judge(&self, state: &ErasedState, candidates: &[TokenId]) -> Result<Vec<Judgement>> {
        let dist = self.scorer.next_dist_erased(state)?;
        let entropy = dist.entropy();
        let max_entropy = (dist.len() as f64).ln();
        candidates
            .iter()
            .map(|&c| {
                let pieces = self.pieces(c)?;
                let p = if pieces.len() == 1 {
                    dist.prob(pieces[0]).max(PROB_FLOOR)
                } else {
                    self.prob(state, c)?
                };
                Ok(Judgement {
                    penalty: 1.0 - p,
                    entropy,
                    max_entropy,
                })
            })
            .collect()
    }

    fn advance(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState> {
        let mut st = state.clone();
        for &id in self.pieces(token)? {
            st = self.scorer.advance_erased(&st, id)?;
        }
        Ok(st)
    }
}
