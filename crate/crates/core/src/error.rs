use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument that violates an operation's contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: field `{field}`: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    /// Pipeline configuration is inconsistent or refers to missing files.
    #[error("configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("backend error: {0}")]
    Backend(#[from] BackendError),

    #[error("evaluation of query {query_id} failed: {source}")]
    Evaluation {
        query_id: String,
        #[source]
        source: BackendError,
    },

    #[error("{} of {total} generation requests failed: {}", .failed.len(), .failed.join(", "))]
    Generation { failed: Vec<String>, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn record(
        path: impl Into<PathBuf>,
        line: usize,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Record {
            path: path.into(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Input {
            path: path.into(),
            source,
        }
    }
}

/// Failure talking to an external model service (generation or NLI).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("not in cache and no live backend configured")]
    CacheMiss,

    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: String },
}

impl BackendError {
    /// Protocol violations and cache misses will not succeed on retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}
