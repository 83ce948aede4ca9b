use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs a power-of-two point count of at least 16, got {0}")]
    InvalidPointCount(usize),

    #[error("grid length must be positive and finite, got {0}")]
    InvalidLength(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("expected {expected} amplitudes for this grid, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite amplitude after {steps} steps (time step too large?)")]
    NonFinite { steps: u64 },

    #[error("ground state not converged after {steps} steps (last relative energy change {last_change:e})")]
    NotConverged { steps: u64, last_change: f64 },

    #[error("fit precondition violated: {0}")]
    FitPrecondition(String),

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("per-pair fidelities were not retained for this curve")]
    PairsUnavailable,

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
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

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
