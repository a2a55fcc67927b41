//! Mapping tokens of one vocabulary onto the inventory of another.
//!
//! Segmentation is greedy longest-match from the left over the non-reserved
//! entries of the target vocabulary; every maximal run of characters that no
//! entry can start becomes a single `<unk>`.

use crate::vocab::{TokenId, Vocabulary, BOS, EOS, UNK};

/// One piece of a bridged token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: TokenId,
    pub text: String,
}

fn max_token_chars(vocab: &Vocabulary) -> usize {
    vocab
        .tokens()
        .iter()
        .skip(3)
        .map(|t| t.chars().count())
        .max()
        .unwrap_or(0)
}

/// Greedy longest-match segmentation of `token` over `vocab`.
pub fn segment(vocab: &Vocabulary, token: &str) -> Vec<Segment> {
    segment_with_limit(vocab, token, max_token_chars(vocab))
}

fn segment_with_limit(vocab: &Vocabulary, token: &str, max_chars: usize) -> Vec<Segment> {
    match token {
        BOS => return vec![reserved(TokenId::BOS, BOS)],
        EOS => return vec![reserved(TokenId::EOS, EOS)],
        UNK => return vec![reserved(TokenId::UNK, UNK)],
        _ => {}
    }
    let bounds: Vec<usize> = token
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(token.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut out: Vec<Segment> = Vec::new();
    let mut unmatched_from: Option<usize> = None;
    let mut i = 0;
    while i < n {
        let longest = (1..=max_chars.min(n - i)).rev().find_map(|len| {
            let piece = &token[bounds[i]..bounds[i + len]];
            vocab
                .id(piece)
                .filter(|id| !id.is_reserved())
                .map(|id| (len, id, piece))
        });
        match longest {
            Some((len, id, piece)) => {
                if let Some(start) = unmatched_from.take() {
                    out.push(Segment {
                        id: TokenId::UNK,
                        text: token[bounds[start]..bounds[i]].to_string(),
                    });
                }
                out.push(Segment {
                    id,
                    text: piece.to_string(),
                });
                i += len;
            }
            None => {
                unmatched_from.get_or_insert(i);
                i += 1;
            }
        }
    }
    if let Some(start) = unmatched_from {
        out.push(Segment {
            id: TokenId::UNK,
            text: token[bounds[start]..].to_string(),
        });
    }
    out
}

fn reserved(id: TokenId, text: &str) -> Segment {
    Segment {
        id,
        text: text.to_string(),
    }
}

/// Ids of the greedy segmentation of `token` in `critic_vocab`.
pub fn bridge_token(critic_vocab: &Vocabulary, token: &str) -> Vec<TokenId> {
    segment(critic_vocab, token)
        .into_iter()
        .map(|s| s.id)
        .collect()
}

/// Precomputed bridge from every id of a source vocabulary into a target
/// vocabulary.
#[derive(Clone, Debug)]
pub struct VocabBridge {
    table: Vec<Vec<TokenId>>,
    identity: bool,
}

impl VocabBridge {
    pub fn new(from: &Vocabulary, to: &Vocabulary) -> Self {
        let identity = from == to;
        let max_chars = max_token_chars(to);
        let table = from
            .tokens()
            .iter()
            .map(|tok| {
                segment_with_limit(to, tok, max_chars)
                    .into_iter()
                    .map(|s| s.id)
                    .collect()
            })
            .collect();
        Self { table, identity }
    }

    pub fn map(&self, id: TokenId) -> &[TokenId] {
        &self.table[id.index()]
    }

    /// Number of ids on the source side.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// True when both sides are the same vocabulary.
    pub fn is_identity(&self) -> bool {
        self.identity
    }
}
