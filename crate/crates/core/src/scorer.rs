//! The incremental left-to-right scoring contract shared by the base model,
//! language-model critics and remote scorers.

use std::any::Any;
use std::sync::Arc;

use crate::dist::TokenDist;
use crate::error::{Error, Result};
use crate::vocab::{Sentence, TokenId, Vocabulary};

/// A model that assigns next-token distributions to growing prefixes.
///
/// `advance` is a pure function of its inputs: replaying the same tokens
/// from the same initial state reproduces the same distributions.
pub trait IncrementalScorer: Send + Sync {
    type State: Clone + Send + Sync + 'static;

    fn vocabulary(&self) -> &Vocabulary;
    fn init_state(&self, source: &Sentence) -> Result<Self::State>;
    fn next_dist(&self, state: &Self::State) -> Result<TokenDist>;
    fn advance(&self, state: &Self::State, token: TokenId) -> Result<Self::State>;
}

/// Type-erased scorer state. States are immutable, so sharing the
/// allocation between hypotheses is equivalent to cloning.
#[derive(Clone)]
pub struct ErasedState(Arc<dyn Any + Send + Sync>);

impl ErasedState {
    pub fn new<T: Any + Send + Sync>(state: T) -> Self {
        Self(Arc::new(state))
    }

    pub fn downcast<T: Any>(&self) -> Result<&T> {
        self.0
            .downcast_ref::<T>()
            .ok_or_else(|| Error::InvalidInput("scorer state of the wrong type".into()))
    }
}

impl std::fmt::Debug for ErasedState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ErasedState")
    }
}

/// Object-safe view of an [`IncrementalScorer`], used where scorers of
/// different concrete types sit side by side.
pub trait DynScorer: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;
    fn init_erased(&self, source: &Sentence) -> Result<ErasedState>;
    fn next_dist_erased(&self, state: &ErasedState) -> Result<TokenDist>;
    fn advance_erased(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState>;
}

impl<S: IncrementalScorer> DynScorer for S {
    fn vocabulary(&self) -> &Vocabulary {
        IncrementalScorer::vocabulary(self)
    }

    fn init_erased(&self, source: &Sentence) -> Result<ErasedState> {
        self.init_state(source).map(ErasedState::new)
    }

    fn next_dist_erased(&self, state: &ErasedState) -> Result<TokenDist> {
        self.next_dist(state.downcast::<S::State>()?)
    }

    fn advance_erased(&self, state: &ErasedState, token: TokenId) -> Result<ErasedState> {
        self.advance(state.downcast::<S::State>()?, token)
            .map(ErasedState::new)
    }
}

/// Sum of log-probabilities of `target` (which must end with `<eos>`) under
/// `scorer`. A zero-probability step yields negative infinity.
pub fn sequence_logprob<S: DynScorer + ?Sized>(
    scorer: &S,
    source: &Sentence,
    target: &[TokenId],
) -> Result<f64> {
    if target.last() != Some(&TokenId::EOS) {
        return Err(Error::Precondition("target must end with <eos>".into()));
    }
    let mut state = scorer.init_erased(source)?;
    let mut total = 0.0;
    for (t, &tok) in target.iter().enumerate() {
        let p = scorer.next_dist_erased(&state)?.prob(tok);
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += p.ln();
        if t + 1 < target.len() {
            state = scorer.advance_erased(&state, tok)?;
        }
    }
    Ok(total)
}
