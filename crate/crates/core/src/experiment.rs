//! Corpus-level decode-and-score runs and the α/β grid sweep.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::critic::Critic;
use crate::decoder::{decode_corpus, CriticConfig, CriticSlot, DecodeConfig, Decoded};
use crate::error::{Error, Result};
use crate::eval::{score_corpus, Score};
use crate::exec::Exec;
use crate::scorer::DynScorer;
use crate::vocab::{Sentence, Vocabulary};

pub const SWEEP_HEADER: &str = "alpha\tbeta\tP\tR\tF0.5\tdelta_F_vs_vanilla";

/// Development sources with their references, as words.
#[derive(Clone, Debug)]
pub struct DevSet {
    pub sources: Vec<Sentence>,
    pub source_words: Vec<Vec<String>>,
    pub references: Vec<Vec<Vec<String>>>,
}

impl DevSet {
    /// Encodes `sources` with `vocab`; each source gets one or more
    /// reference token sequences.
    pub fn new(vocab: &Vocabulary, sources: &[String], references: Vec<Vec<Vec<String>>>) -> Result<Self> {
        if sources.len() != references.len() {
            return Err(Error::InvalidInput(format!(
                "{} sources but {} reference sets",
                sources.len(),
                references.len()
            )));
        }
        let encoded = sources.iter().map(|s| vocab.encode(s)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source_words: sources.iter().map(|s| crate::corpus::tokenize(s)).collect(),
            sources: encoded,
            references,
        })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn score(&self, vocab: &Vocabulary, outputs: &[Decoded]) -> Result<Score> {
        let hyps: Vec<Vec<String>> = outputs
            .iter()
            .map(|d| d.tokens.iter().map(|&t| vocab.token(t).to_string()).collect())
            .collect();
        score_corpus(&self.source_words, &hyps, &self.references)
    }
}

/// Decodes the whole dev set and scores it.
pub fn run(
    base: &dyn DynScorer,
    critics: &[CriticSlot<'_>],
    dev: &DevSet,
    cfg: &DecodeConfig,
    exec: Exec,
) -> Result<(Vec<Decoded>, Score)> {
    let out = decode_corpus(base, critics, &dev.sources, cfg, exec)?;
    let score = dev.score(base.vocabulary(), &out)?;
    Ok((out, score))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            alphas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            betas: vec![0.01, 0.1, 1.0, 10.0, 100.0],
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if let Some(x) = self.alphas.iter().chain(&self.betas).find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidConfig(format!("grid value {x} must be finite and >= 0")));
        }
        Ok(())
    }

    /// Cells in output order: α outer, β inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.alphas
            .iter()
            .flat_map(|&a| self.betas.iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// `None` for the vanilla baseline.
    pub cell: Option<(f64, f64)>,
    pub score: Score,
    pub delta_f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn vanilla(&self) -> &SweepRow {
        &self.rows[0]
    }

    /// Highest F0.5; ties go to the lexicographically lowest (α, β).
    pub fn best_cell(&self) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in self.rows.iter().filter(|r| r.cell.is_some()) {
            let better = match best {
                None => true,
                Some(b) => {
                    row.score.f05 > b.score.f05
                        || (row.score.f05 == b.score.f05 && lower(row.cell.unwrap(), b.cell.unwrap()))
                }
            };
            if better {
                best = Some(row);
            }
        }
        best
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (a, b) = match r.cell {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => ("-".to_string(), "-".to_string()),
            };
            let _ = writeln!(
                out,
                "{a}\t{b}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                r.score.precision, r.score.recall, r.score.f05, r.delta_f
            );
        }
        out
    }
}

fn lower(x: (f64, f64), y: (f64, f64)) -> bool {
    x.0 < y.0 || (x.0 == y.0 && x.1 < y.1)
}

/// Decodes the dev set once per grid cell, with every critic weighted by
/// the cell's (α, β), plus once without critics. Cells run under `exec`;
/// rows come back vanilla first, then in grid order.
pub fn sweep(
    base: &dyn DynScorer,
    critics: &[(&dyn Critic, CriticConfig)],
    dev: &DevSet,
    grid: &Grid,
    cfg: &DecodeConfig,
    exec: Exec,
) -> Result<SweepTable> {
    grid.validate()?;
    if critics.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one critic".into()));
    }
    let inner = DecodeConfig {
        exec: Exec::Sequential,
        ..*cfg
    };
    let (_, vanilla) = run(base, &[], dev, &inner, exec)?;
    let cells = grid.cells();
    let scores = exec.try_map(&cells, |&(alpha, beta)| {
        let slots: Vec<CriticSlot> = critics
            .iter()
            .map(|&(c, template)| {
                CriticSlot::new(
                    c,
                    CriticConfig {
                        alpha,
                        beta,
                        enabled: true,
                        ..template
                    },
                )
            })
            .collect();
        run(base, &slots, dev, &inner, Exec::Sequential).map(|r| r.1)
    })?;
    let mut rows = vec![SweepRow {
        cell: None,
        score: vanilla,
        delta_f: 0.0,
    }];
    rows.extend(cells.into_iter().zip(scores).map(|(cell, score)| SweepRow {
        cell: Some(cell),
        delta_f: score.f05 - vanilla.f05,
        score,
    }));
    Ok(SweepTable { rows })
}
