use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by configuration parsing, validation and report I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("profile `{model}` violates invariant: {reason}")]
    InvalidProfile { model: String, reason: String },

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed trace line {line} in {path}: {reason}")]
    Trace {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report audit failed: {0}")]
    Audit(String),
}

impl Error {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
