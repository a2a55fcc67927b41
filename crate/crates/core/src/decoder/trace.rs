//! Per-step score records of a decoded hypothesis.

use std::fmt::Write;

use crate::critic::CriticKind;
use crate::vocab::{TokenId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticStep {
    pub kind: CriticKind,
    pub penalty: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub token: TokenId,
    pub base_logp: f64,
    pub critics: Vec<CriticStep>,
    pub fused: f64,
    pub cumulative: f64,
}

impl StepRecord {
    /// Summed penalty and coefficient of every critic of `kind`.
    pub fn critic(&self, kind: CriticKind) -> Option<(f64, f64)> {
        let hits: Vec<&CriticStep> = self.critics.iter().filter(|c| c.kind == kind).collect();
        if hits.is_empty() {
            return None;
        }
        Some((
            hits.iter().map(|c| c.penalty).sum(),
            hits.iter().map(|c| c.lambda).sum(),
        ))
    }
}

pub const TRACE_HEADER: &str =
    "step\ttoken\tbase_logp\tlm_penalty\tlm_lambda\tged_penalty\tged_lambda\tfused\tcumulative";

/// Trace as TSV; columns of absent critics hold `-`.
pub fn trace_tsv(records: &[StepRecord], vocab: &Vocabulary) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let col = |kind| match r.critic(kind) {
            Some((p, l)) => format!("{p:.6}\t{l:.6}"),
            None => "-\t-".to_string(),
        };
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}\t{:.6}\t{:.6}",
            r.step,
            vocab.token(r.token),
            r.base_logp,
            col(CriticKind::Lm),
            col(CriticKind::Ged),
            r.fused,
            r.cumulative
        )
        .expect("write to string");
    }
    out
}
