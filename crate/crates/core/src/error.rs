use std::path::PathBuf;

use thiserror::Error;

/// Broad classes of failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Transport,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unsupported vocabulary: {0}")]
    UnsupportedVocabulary(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("empty sentence")]
    EmptySentence,
    #[error("empty vocabulary: no token reaches min_count {0}")]
    EmptyVocabulary(usize),
    #[error("invalid split spec: train fraction {0} must lie strictly between 0 and 1")]
    InvalidSplit(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no training data")]
    NoData,
    #[error("scorer state is closed (end of sentence already emitted)")]
    ClosedState,
    #[error("impossible emission: token {0} has zero probability")]
    ImpossibleEmission(u32),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid entropy value {0}")]
    InvalidEntropy(f64),
    #[error("trace unavailable: decode was run without tracing")]
    TraceUnavailable,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("vocabulary hash mismatch: expected {expected}, remote reports {actual}")]
    VocabMismatch { expected: String, actual: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("remote error {code}: {message}")]
    Remote { code: i64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidSplit(_)
            | Error::UnsupportedVocabulary(_)
            | Error::VocabMismatch { .. } => ErrorClass::Config,
            Error::Transport(_) | Error::Remote { .. } => ErrorClass::Transport,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
