//! Training data for the detector, generated from base-model beam outputs.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::labels::label_alignment;
use super::model::GedExample;
use crate::corpus::{split, ParallelPair, SplitSpec};
use crate::decoder::{beam_search, DecodeConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::scorer::DynScorer;
use crate::vocab::{TokenId, EOS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenConfig {
    /// Hypotheses kept per source.
    pub k: usize,
    pub beam_width: usize,
    pub split: SplitSpec,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            k: 12,
            beam_width: 12,
            split: SplitSpec {
                train_fraction: 0.9,
                seed: 0,
            },
        }
    }
}

/// One example per emission step of `hyp` (its `<eos>` included).
pub fn examples_for(
    vocab: &crate::vocab::Vocabulary,
    pair: &ParallelPair,
    hyp: &[TokenId],
) -> Vec<GedExample> {
    let labels = label_alignment(hyp, pair.target.ids()).with_eos();
    let words: Vec<String> = hyp.iter().map(|&t| vocab.token(t).to_string()).collect();
    let source = vocab.decode(pair.source.ids());
    labels
        .into_iter()
        .enumerate()
        .map(|(t, label)| GedExample {
            source: source.clone(),
            prefix: words[..t].to_vec(),
            next: words.get(t).cloned().unwrap_or_else(|| EOS.to_string()),
            label,
        })
        .collect()
}

/// Decodes every source with the base model, labels the top `k` finished
/// hypotheses against the reference and keeps the first occurrence of each
/// distinct example, in input order.
pub fn generate_ged_data(
    base: &dyn DynScorer,
    pairs: &[ParallelPair],
    cfg: &GenConfig,
    exec: Exec,
) -> Result<Vec<GedExample>> {
    if cfg.k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if cfg.beam_width < cfg.k {
        return Err(Error::InvalidConfig(format!(
            "beam width {} is smaller than k {}",
            cfg.beam_width, cfg.k
        )));
    }
    let dcfg = DecodeConfig {
        beam_width: cfg.beam_width,
        ..DecodeConfig::default()
    };
    let vocab = base.vocabulary();
    let per_pair = exec.try_map(pairs, |pair| {
        let hyps = beam_search(base, &[], &pair.source, &dcfg)?;
        Ok::<_, Error>(
            hyps.iter()
                .take(cfg.k)
                .flat_map(|h| examples_for(vocab, pair, &h.tokens))
                .collect::<Vec<_>>(),
        )
    })?;
    let mut seen = HashSet::new();
    Ok(per_pair
        .into_iter()
        .flatten()
        .filter(|e| seen.insert(e.clone()))
        .collect())
}

/// Generation followed by the train/dev split.
pub fn generate_and_split(
    base: &dyn DynScorer,
    pairs: &[ParallelPair],
    cfg: &GenConfig,
    exec: Exec,
) -> Result<(Vec<GedExample>, Vec<GedExample>)> {
    let all = generate_ged_data(base, pairs, cfg, exec)?;
    split(&all, cfg.split)
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[GedExample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<GedExample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: GedExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if ex.next.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "empty next token".into(),
            });
        }
        out.push(ex);
    }
    Ok(out)
}
