//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading or validating inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },

    #[error("alias {alias:?} is claimed by both {first:?} and {second:?}")]
    AliasConflict { alias: String, first: String, second: String },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error(transparent)]
    Rule(#[from] crate::rules::RuleError),

    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
