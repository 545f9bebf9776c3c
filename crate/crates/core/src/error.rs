use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("unknown style `{0}`")]
    UnknownStyle(String),

    #[error("style `{0}` has no responses")]
    EmptyStyle(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("top-k value {k} outside 1..={vocab}")]
    TopKOutOfRange { k: usize, vocab: usize },

    #[error("no n-grams of order {0}")]
    NoNgrams(usize),

    #[error("vocabulary hash mismatch: checkpoint has {expected}, got {found}")]
    VocabularyMismatch { expected: String, found: String },

    #[error("checkpoint probe mismatch: restored model does not reproduce stored log-probabilities")]
    ProbeMismatch,

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
