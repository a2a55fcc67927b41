//! Corpus ingestion, vocabulary construction and deterministic splits.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::vocab::{Sentence, Vocabulary};

/// Whitespace tokenization; empty segments are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Tokens with `count >= min_count`, ordered by count descending then by
/// string, after the three reserved entries.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::NoData);
    }
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sent in corpus {
        for tok in sent {
            *counts.entry(tok.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tok, c)| c >= min_count && !matches!(tok, "<bos>" | "<eos>" | "<unk>"))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    kept.sort_by_key(|&(tok, c)| (Reverse(c), tok));
    Vocabulary::from_words(kept.into_iter().map(|(t, _)| t))
}

/// A source sentence and its correction, encoded in one vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPair {
    pub source: Sentence,
    pub target: Sentence,
}

impl ParallelPair {
    pub fn encode(vocab: &Vocabulary, source: &str, target: &str) -> Result<Self> {
        Ok(Self {
            source: vocab.encode(source)?,
            target: vocab.encode(target)?,
        })
    }
}

/// Raw text pair as read from a TSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextPair {
    pub source: String,
    pub target: String,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a parallel TSV: `source<TAB>target`, no header.
pub fn read_parallel(path: impl AsRef<Path>) -> Result<Vec<TextPair>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_parallel(&text, path)
}

pub fn parse_parallel(text: &str, path: &Path) -> Result<Vec<TextPair>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(src), Some(tgt), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "expected exactly two tab-separated columns".into(),
            });
        };
        if tokenize(src).is_empty() || tokenize(tgt).is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "empty sentence".into(),
            });
        }
        out.push(TextPair {
            source: src.to_string(),
            target: tgt.to_string(),
        });
    }
    Ok(out)
}

/// Reads one sentence per line. Blank lines are rejected so line numbers
/// stay aligned with sentence indices.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            if tokenize(line).is_empty() {
                Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "empty sentence".into(),
                })
            } else {
                Ok(line.to_string())
            }
        })
        .collect()
}

pub fn write_lines<S: AsRef<str>>(path: impl AsRef<Path>, lines: &[S]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    for l in lines {
        buf.push_str(l.as_ref());
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// How to divide a dataset into train and development parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidSplit(train_fraction));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    /// Number of items that go to train: `ceil(fraction * n)`.
    pub fn train_len(&self, n: usize) -> usize {
        let exact = self.train_fraction * n as f64;
        // guard against 0.9 * 10 landing a hair above 9
        let rounded = exact.round();
        let k = if (exact - rounded).abs() < 1e-9 {
            rounded
        } else {
            exact.ceil()
        };
        (k as usize).min(n)
    }
}

/// Seeded permutation of `0..n`: Fisher-Yates from the top, drawing
/// `j = next_u64() % (i + 1)` from a SplitMix64 generator.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Deterministic shuffle, then the first `ceil(fraction * n)` items to train.
pub fn split<T: Clone>(dataset: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidSplit(spec.train_fraction));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "split needs at least 2 items, got {}",
            dataset.len()
        )));
    }
    let perm = permutation(dataset.len(), spec.seed);
    let k = spec.train_len(dataset.len());
    let train = perm[..k].iter().map(|&i| dataset[i].clone()).collect();
    let dev = perm[k..].iter().map(|&i| dataset[i].clone()).collect();
    Ok((train, dev))
}
