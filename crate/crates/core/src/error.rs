use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sentence is empty after trimming")]
    EmptySentence,

    #[error("cannot train a translation table on an empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(
        "line {line}: link {source_index}-{target_index} outside a {source_len}x{target_len} pair"
    )]
    Bounds {
        line: usize,
        source_index: usize,
        target_index: usize,
        source_len: usize,
        target_len: usize,
    },

    #[error("trim length {len} outside 1..={max}")]
    Range { len: usize, max: usize },

    #[error("degenerate metric input: {0}")]
    DegenerateInput(&'static str),

    #[error("input mismatch: {0}")]
    InputMismatch(String),

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
