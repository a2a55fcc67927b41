//! Unit-cost Levenshtein alignment.
//!
//! The backtrace starts at the end of both sequences and, among optimal
//! predecessors, prefers match, then substitution, then deletion (a token
//! present only on the left side), then insertion (a token present only on
//! the right side). Edit extraction, GED labeling and channel training all
//! share this one alignment.

/// One alignment column. Indices point into the left (`src`) and right
/// (`tgt`) sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignOp {
    Match { src: usize, tgt: usize },
    Sub { src: usize, tgt: usize },
    Del { src: usize },
    Ins { tgt: usize },
}

impl AlignOp {
    pub fn is_match(self) -> bool {
        matches!(self, AlignOp::Match { .. })
    }
}

/// Full distance table, `(n + 1) x (m + 1)` row-major.
fn table<T: PartialEq>(src: &[T], tgt: &[T]) -> Vec<usize> {
    let (n, m) = (src.len(), tgt.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(src[i - 1] != tgt[j - 1]);
            let up = d[(i - 1) * w + j] + 1;
            let left = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(up).min(left);
        }
    }
    d
}

pub fn distance<T: PartialEq>(src: &[T], tgt: &[T]) -> usize {
    table(src, tgt)[(src.len() + 1) * (tgt.len() + 1) - 1]
}

/// Minimal-cost alignment in left-to-right order.
pub fn align<T: PartialEq>(src: &[T], tgt: &[T]) -> Vec<AlignOp> {
    let d = table(src, tgt);
    let w = tgt.len() + 1;
    let (mut i, mut j) = (src.len(), tgt.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = src[i - 1] == tgt[j - 1];
            let diag = d[(i - 1) * w + j - 1];
            if same && diag == here {
                ops.push(AlignOp::Match { src: i - 1, tgt: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && diag + 1 == here {
                ops.push(AlignOp::Sub { src: i - 1, tgt: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(AlignOp::Del { src: i - 1 });
            i -= 1;
        } else {
            ops.push(AlignOp::Ins { tgt: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Edit distances of a growing prefix against every prefix of a fixed
/// reference: `row[i] = distance(prefix, reference[..i])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixRow {
    row: Vec<usize>,
}

impl PrefixRow {
    pub fn new(reference_len: usize) -> Self {
        Self {
            row: (0..=reference_len).collect(),
        }
    }

    pub fn extend<T: PartialEq>(&self, reference: &[T], token: &T) -> Self {
        let mut next = Vec::with_capacity(self.row.len());
        next.push(self.row[0] + 1);
        for i in 1..self.row.len() {
            let diag = self.row[i - 1] + usize::from(reference[i - 1] != *token);
            let up = self.row[i] + 1;
            let left = next[i - 1] + 1;
            next.push(diag.min(up).min(left));
        }
        Self { row: next }
    }

    pub fn values(&self) -> &[usize] {
        &self.row
    }

    /// Best-matching reference prefix length and its cost; ties go to the
    /// longer reference prefix.
    pub fn frontier(&self) -> (usize, usize) {
        let mut best = (0, usize::MAX);
        for (i, &c) in self.row.iter().enumerate() {
            if c <= best.1 {
                best = (i, c);
            }
        }
        best
    }
}
