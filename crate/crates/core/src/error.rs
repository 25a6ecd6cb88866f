use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry, learning and data layers.
#[derive(Debug, Error)]
pub enum HoroError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model or spec: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HoroError>;

pub(crate) fn invalid(msg: impl Into<String>) -> HoroError {
    HoroError::InvalidInput(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(HoroError::DimensionMismatch { expected, got })
    }
}
