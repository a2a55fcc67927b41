//! Token-level edit extraction and precision/recall/F0.5 scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::align::{align, AlignOp};
use crate::corpus::tokenize;
use crate::error::{Error, Result};

/// Replace `src[start..end]` with `replacement`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<String>,
}

/// Non-overlapping edits sorted by span.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EditSet {
    pub edits: Vec<Edit>,
}

impl EditSet {
    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Number of edits present in both sets.
    pub fn overlap(&self, other: &EditSet) -> usize {
        self.edits.iter().filter(|e| other.edits.contains(e)).count()
    }
}

/// Edits turning `src` into `hyp`: each maximal run of non-matching
/// alignment columns becomes one edit.
pub fn extract_edits<S: AsRef<str>>(src: &[S], hyp: &[S]) -> EditSet {
    let s: Vec<&str> = src.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let mut edits = Vec::new();
    let mut pos = 0;
    let mut open: Option<Edit> = None;
    for op in align(&s, &h) {
        if let AlignOp::Match { .. } = op {
            edits.extend(open.take());
            pos += 1;
            continue;
        }
        let e = open.get_or_insert_with(|| Edit {
            start: pos,
            end: pos,
            replacement: Vec::new(),
        });
        match op {
            AlignOp::Sub { tgt, .. } => {
                pos += 1;
                e.replacement.push(h[tgt].to_string());
            }
            AlignOp::Del { .. } => pos += 1,
            AlignOp::Ins { tgt } => e.replacement.push(h[tgt].to_string()),
            AlignOp::Match { .. } => unreachable!(),
        }
        e.end = pos;
    }
    edits.extend(open);
    EditSet { edits }
}

/// Applies `edits` to `src`.
pub fn apply_edits<S: AsRef<str>>(src: &[S], edits: &EditSet) -> Vec<String> {
    let mut out = Vec::new();
    let mut pos = 0;
    for e in &edits.edits {
        out.extend(src[pos..e.start].iter().map(|t| t.as_ref().to_string()));
        out.extend(e.replacement.iter().cloned());
        pos = e.end;
    }
    out.extend(src[pos..].iter().map(|t| t.as_ref().to_string()));
    out
}

/// `(1 + beta^2) P R / (beta^2 P + R)`, 0 when both are 0.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

pub fn f05(p: f64, r: f64) -> f64 {
    f_beta(p, r, 0.5)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn of(system: &EditSet, gold: &EditSet) -> Self {
        let tp = system.overlap(gold);
        Self {
            tp,
            fp: system.len() - tp,
            fn_: gold.len() - tp,
        }
    }

    /// Precision, 1 when nothing was proposed.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// Recall, 1 when nothing needed correcting.
    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f05(&self) -> f64 {
        f05(self.precision(), self.recall())
    }

    fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub counts: Counts,
}

impl Score {
    pub fn from_counts(counts: Counts) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f05: counts.f05(),
            counts,
        }
    }
}

impl fmt::Display for Score {
    /// `P<TAB>R<TAB>F0.5<TAB>TP<TAB>FP<TAB>FN`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
            self.precision, self.recall, self.f05, self.counts.tp, self.counts.fp, self.counts.fn_
        )
    }
}

/// Counts of the reference that best explains `hyp`: highest sentence F0.5,
/// then more true positives, then fewer errors, then the earlier reference.
pub fn best_reference_counts<S: AsRef<str>>(src: &[S], hyp: &[S], refs: &[Vec<S>]) -> Counts {
    let system = extract_edits(src, hyp);
    let mut best: Option<Counts> = None;
    for r in refs {
        let c = Counts::of(&system, &extract_edits(src, r));
        let better = match best {
            None => true,
            Some(b) => {
                let (fc, fb) = (c.f05(), b.f05());
                fc > fb || (fc == fb && (c.tp > b.tp || (c.tp == b.tp && c.fp + c.fn_ < b.fp + b.fn_)))
            }
        };
        if better {
            best = Some(c);
        }
    }
    best.unwrap_or(Counts {
        tp: 0,
        fp: system.len(),
        fn_: 0,
    })
}

/// Corpus-level scores with per-sentence best-reference selection.
pub fn score_corpus<S: AsRef<str>>(srcs: &[Vec<S>], hyps: &[Vec<S>], refs: &[Vec<Vec<S>>]) -> Result<Score> {
    if srcs.len() != hyps.len() || srcs.len() != refs.len() {
        return Err(Error::InvalidInput(format!(
            "{} sources, {} hypotheses and {} reference sets",
            srcs.len(),
            hyps.len(),
            refs.len()
        )));
    }
    let mut total = Counts::default();
    for ((s, h), r) in srcs.iter().zip(hyps).zip(refs) {
        total.add(best_reference_counts(s, h, r));
    }
    Ok(Score::from_counts(total))
}

/// Convenience wrapper over raw lines.
pub fn score_lines(srcs: &[String], hyps: &[String], refs: &[Vec<String>]) -> Result<Score> {
    let t = |v: &[String]| v.iter().map(|l| tokenize(l)).collect::<Vec<_>>();
    let r: Vec<Vec<Vec<String>>> = refs.iter().map(|rs| t(rs)).collect();
    score_corpus(&t(srcs), &t(hyps), &r)
}

/// Reads `index<TAB>reference` lines (0-based sentence index; repeated
/// indices give several references) into one reference list per sentence.
pub fn read_references(path: impl AsRef<Path>, n_sentences: usize) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_references(&text, path, n_sentences)
}

pub fn parse_references(text: &str, path: &Path, n_sentences: usize) -> Result<Vec<Vec<String>>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut by_index: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, reference) = line
            .split_once('\t')
            .ok_or_else(|| err(i + 1, "expected index<TAB>reference".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| err(i + 1, format!("bad sentence index {idx:?}")))?;
        if idx >= n_sentences {
            return Err(err(i + 1, format!("index {idx} beyond {n_sentences} sentences")));
        }
        by_index.entry(idx).or_default().push(reference.to_string());
    }
    (0..n_sentences)
        .map(|i| {
            by_index.remove(&i).ok_or_else(|| Error::InvalidInput(format!(
                "{}: sentence {i} has no reference",
                path.display()
            )))
        })
        .collect()
}
