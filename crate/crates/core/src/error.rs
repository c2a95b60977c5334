use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by solvers, embeddings and the data harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative mass at index {index}: {value}")]
    NegativeMass { index: usize, value: f64 },

    #[error("total mass must be positive and finite, got {0}")]
    ZeroMass(f64),

    #[error("cannot rescale a space whose points are all identical")]
    NoScale,

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("marginal mismatch: row total {row} vs column total {col}")]
    MarginalMismatch { row: f64, col: f64 },

    #[error("cost matrix contains a non-finite entry at ({0}, {1})")]
    NanCost(usize, usize),

    #[error("plan violates the marginal bounds: {0}")]
    Infeasible(String),

    #[error("embeddings are not comparable: {0}")]
    ReferenceMismatch(String),

    #[error("oracle size guard: {0}")]
    SizeGuard(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver: 3 for numerical
    /// failures, 2 for everything caused by bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
