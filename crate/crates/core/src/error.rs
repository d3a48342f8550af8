use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown label '{label}' at line {line}")]
    UnknownLabel { label: String, line: usize },

    #[error("{0}: dataset is empty")]
    EmptyDataset(PathBuf),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Transport failure that survived every retry.
    #[error("{endpoint} endpoint unreachable after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },

    #[error("{endpoint} protocol error: {message}")]
    Protocol { endpoint: String, message: String },

    #[error("{endpoint} capability error: {message}")]
    Capability { endpoint: String, message: String },

    #[error("offline mode: no cached response for {endpoint} request {key}")]
    CacheMiss { endpoint: String, key: String },

    #[error("generation error: {0}")]
    Generation(String),

    /// The run cannot produce meaningful output from its inputs.
    #[error("degraded input: {0}")]
    Degraded(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("i/o error on {path}: {source}")]
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

    pub(crate) fn protocol(endpoint: impl ToString, message: impl Into<String>) -> Self {
        Error::Protocol {
            endpoint: endpoint.to_string(),
            message: message.into(),
        }
    }

    /// True for failures caused by model endpoints rather than by inputs or config.
    pub fn is_endpoint_error(&self) -> bool {
        matches!(
            self,
            Error::Transport { .. }
                | Error::Protocol { .. }
                | Error::Capability { .. }
                | Error::CacheMiss { .. }
        )
    }
}
