//! Incremental error labels derived from a hypothesis/reference alignment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::{align, AlignOp};
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GedLabel {
    #[serde(rename = "COR")]
    Cor,
    #[serde(rename = "RED")]
    Red,
    #[serde(rename = "SUB")]
    Sub,
    #[serde(rename = "MISS")]
    Miss,
}

impl GedLabel {
    pub const ALL: [GedLabel; 4] = [GedLabel::Cor, GedLabel::Red, GedLabel::Sub, GedLabel::Miss];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GedLabel::Cor => "COR",
            GedLabel::Red => "RED",
            GedLabel::Sub => "SUB",
            GedLabel::Miss => "MISS",
        }
    }

    pub fn is_error(self) -> bool {
        self != GedLabel::Cor
    }
}

impl fmt::Display for GedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GedLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown GED label {s:?}")))
    }
}

/// Labels for every hypothesis token plus the end-of-sentence step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    pub tokens: Vec<GedLabel>,
    /// `Miss` when reference tokens remain unmatched after the last
    /// hypothesis token, `Cor` otherwise.
    pub eos: GedLabel,
}

impl Labeling {
    pub fn trailing_miss(&self) -> bool {
        self.eos == GedLabel::Miss
    }

    /// Token labels followed by the end-of-sentence label.
    pub fn with_eos(&self) -> Vec<GedLabel> {
        let mut v = self.tokens.clone();
        v.push(self.eos);
        v
    }
}

/// Labels `hyp` against `reference` through one minimal alignment.
///
/// Equal aligned tokens are `Cor`, unequal ones `Sub`, hypothesis-only
/// tokens `Red`. A token directly preceded by one or more skipped reference
/// tokens is `Miss` whatever its own alignment says.
pub fn label_alignment<T: PartialEq>(hyp: &[T], reference: &[T]) -> Labeling {
    let mut tokens = vec![GedLabel::Cor; hyp.len()];
    let mut pending_miss = false;
    for op in align(reference, hyp) {
        let (tgt, label) = match op {
            AlignOp::Del { .. } => {
                pending_miss = true;
                continue;
            }
            AlignOp::Match { tgt, .. } => (tgt, GedLabel::Cor),
            AlignOp::Sub { tgt, .. } => (tgt, GedLabel::Sub),
            AlignOp::Ins { tgt } => (tgt, GedLabel::Red),
        };
        tokens[tgt] = if pending_miss { GedLabel::Miss } else { label };
        pending_miss = false;
    }
    Labeling {
        tokens,
        eos: if pending_miss {
            GedLabel::Miss
        } else {
            GedLabel::Cor
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_all_correct() {
        let l = label_alignment(&w("a b c"), &w("a b c"));
        assert_eq!(l.with_eos(), vec![GedLabel::Cor; 4]);
    }

    #[test]
    fn small_fixtures() {
        assert_eq!(label_alignment(&w("a c"), &w("a b c")).tokens, vec![GedLabel::Cor, GedLabel::Miss]);
        assert_eq!(
            label_alignment(&w("a x b"), &w("a b")).tokens,
            vec![GedLabel::Cor, GedLabel::Red, GedLabel::Cor]
        );
        let short = label_alignment(&w("a"), &w("a b"));
        assert_eq!(short.tokens, vec![GedLabel::Cor]);
        assert!(short.trailing_miss());
    }

    #[test]
    fn label_strings_round_trip() {
        for l in GedLabel::ALL {
            assert_eq!(l.as_str().parse::<GedLabel>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!("cor".parse::<GedLabel>().is_err());
    }

    proptest! {
        #[test]
        fn length_and_prefix_shift(hyp in prop::collection::vec(0u8..4, 1..7), reference in prop::collection::vec(0u8..4, 1..7)) {
            let base = label_alignment(&hyp, &reference);
            prop_assert_eq!(base.tokens.len(), hyp.len());
            let mut h2 = vec![9u8];
            h2.extend(&hyp);
            let mut r2 = vec![9u8];
            r2.extend(&reference);
            let shifted = label_alignment(&h2, &r2);
            prop_assert_eq!(shifted.tokens[0], GedLabel::Cor);
            let mut a = base.with_eos();
            let mut b = shifted.with_eos()[1..].to_vec();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
