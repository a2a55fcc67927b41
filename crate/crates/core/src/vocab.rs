//! Closed token inventories and sentences encoded against them.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::tokenize;
use crate::error::{Error, Result};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Index of a token inside one [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const BOS: TokenId = TokenId(0);
    pub const EOS: TokenId = TokenId(1);
    pub const UNK: TokenId = TokenId(2);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_reserved(self) -> bool {
        self.0 < 3
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered, duplicate-free token inventory. Ids 0, 1, 2 are always
/// `<bos>`, `<eos>` and `<unk>`.
#[derive(Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vocabulary")
            .field("size", &self.tokens.len())
            .finish()
    }
}

impl Vocabulary {
    /// Builds a vocabulary from the full token list, reserved tokens included.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 4 {
            return Err(Error::InvalidVocabulary(format!(
                "need at least 4 entries, got {}",
                tokens.len()
            )));
        }
        for (pos, expected) in [BOS, EOS, UNK].iter().enumerate() {
            if tokens[pos] != *expected {
                return Err(Error::InvalidVocabulary(format!(
                    "entry {pos} must be {expected}, found {:?}",
                    tokens[pos]
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocabulary(format!(
                    "entry {i} is empty or contains whitespace"
                )));
            }
            if index.insert(tok.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Reserved tokens followed by `words` in the given order.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        Self::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(TokenId::UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> {
        (0..self.tokens.len() as u32).map(TokenId)
    }

    /// Canonical file bytes: one token per line, line number = id.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for tok in &self.tokens {
            out.extend_from_slice(tok.as_bytes());
            out.push(b'\n');
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::InvalidVocabulary(format!("not UTF-8: {e}")))?;
        let body = text.strip_suffix('\n').unwrap_or(text);
        let tokens = body
            .split('\n')
            .map(|line| line.strip_suffix('\r').unwrap_or(line).to_string())
            .collect();
        Self::new(tokens)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Lowercase hex SHA-256 of [`Self::to_bytes`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    /// Tokenizes `text` and maps every token, unknown words to `<unk>`.
    pub fn encode(&self, text: &str) -> Result<Sentence> {
        let toks = tokenize(text);
        if toks.is_empty() {
            return Err(Error::EmptySentence);
        }
        let ids = toks.iter().map(|t| self.id_or_unk(t)).collect();
        Sentence::new(self, ids, text.to_string())
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        Vocabulary::new(tokens).map_err(serde::de::Error::custom)
    }
}

/// A token sequence valid in one vocabulary, plus its surface form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    ids: Vec<TokenId>,
    raw: String,
}

impl Sentence {
    pub fn new(vocab: &Vocabulary, ids: Vec<TokenId>, raw: String) -> Result<Self> {
        for &id in &ids {
            if id.index() >= vocab.len() {
                return Err(Error::InvalidInput(format!(
                    "token id {id} outside vocabulary of size {}",
                    vocab.len()
                )));
            }
            if id == TokenId::BOS || id == TokenId::EOS {
                return Err(Error::InvalidInput(
                    "sentence body may not contain <bos> or <eos>".into(),
                ));
            }
        }
        Ok(Self { ids, raw })
    }

    /// Sentence whose surface form is the space-joined tokens.
    pub fn from_ids(vocab: &Vocabulary, ids: Vec<TokenId>) -> Result<Self> {
        let mut s = Self::new(vocab, ids, String::new())?;
        s.raw = vocab.decode(&s.ids);
        Ok(s)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn words<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.ids.iter().map(|&id| vocab.token(id)).collect()
    }
}
