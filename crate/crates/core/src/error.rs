use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, estimators and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("income must be non-negative, got {0}")]
    NegativeIncome(f64),

    #[error("quadrature did not converge on [{lower}, {upper}]: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation step is unstable: dt * max(|a|, |a'|, b) = {0} (must be < 0.1)")]
    UnstableStep(f64),

    #[error("no overlap between survey and rich-list segments for any scale in [{lower:e}, {upper:e}]")]
    NoOverlap { lower: f64, upper: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
