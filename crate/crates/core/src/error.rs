use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rank deficient input: column {column} has residual norm {norm:e}")]
    Rank { column: usize, norm: f64 },

    #[error("{}:{location}: {message}", file.display())]
    Ingestion { file: PathBuf, location: String, message: String },

    #[error("infeasible split: {0}")]
    Split(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn ingest(file: impl Into<PathBuf>, location: impl ToString, message: impl Into<String>) -> Self {
        Error::Ingestion { file: file.into(), location: location.to_string(), message: message.into() }
    }
}
