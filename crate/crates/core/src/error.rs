use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operator or metric was called with parameters outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Input data (image, table, sample) violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A pipeline operator failed; carries the operator's position in the pipeline.
    #[error("operator #{index} ({kind}) failed: {source}")]
    Operator {
        index: usize,
        kind: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    /// A library invariant broke; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's data or parameters rather than the environment.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Internal(_) => false,
            Error::Operator { source, .. } => source.is_invalid_input(),
            _ => true,
        }
    }
}
