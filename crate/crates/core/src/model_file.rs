//! Versioned JSON envelope shared by every trained model on disk.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<P> {
    format_version: u32,
    model_kind: String,
    vocab_hash: String,
    vocabulary: Vocabulary,
    params: P,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
}

pub fn to_json<P: Serialize>(kind: &str, vocab: &Vocabulary, params: &P) -> Result<String> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        model_kind: kind.to_string(),
        vocab_hash: vocab.hash(),
        vocabulary: vocab.clone(),
        params,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn from_json<P: DeserializeOwned>(kind: &str, text: &str) -> Result<(Vocabulary, P)> {
    let header: Header = serde_json::from_str(text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.model_kind != kind {
        return Err(Error::ModelFormat(format!(
            "expected model_kind {kind:?}, found {:?}",
            header.model_kind
        )));
    }
    let env: Envelope<P> = serde_json::from_str(text)?;
    let actual = env.vocabulary.hash();
    if actual != env.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: env.vocab_hash,
            actual,
        });
    }
    Ok((env.vocabulary, env.params))
}

/// The `model_kind` of a model file, without parsing its parameters.
pub fn peek_kind(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text)?;
    Ok(header.model_kind)
}

pub fn save<P: Serialize>(path: &Path, kind: &str, vocab: &Vocabulary, params: &P) -> Result<()> {
    let text = to_json(kind, vocab, params)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<P: DeserializeOwned>(path: &Path, kind: &str) -> Result<(Vocabulary, P)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(kind, &text)
}

/// Natural-log value that may be negative infinity; JSON has no literal for
/// it, so it is written as `null`.
pub mod log_prob {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}
