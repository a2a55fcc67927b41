//! Beam search with critic intervention.

pub mod beam;
pub mod lambda;
pub mod trace;

pub use beam::{beam_decode, beam_search, decode_corpus, CriticSlot, DecodeConfig, Decoded};
pub use lambda::{dynamic_lambda, fused_token_score, CriticConfig};
pub use trace::{trace_tsv, CriticStep, StepRecord, TRACE_HEADER};
