use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QgError {
    #[error("N must be even and at least 4, got {0}")]
    InvalidGridSize(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} variables")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mean stream function is numerically zero; mu is undefined")]
    UndefinedEstimate,

    #[error("accumulation at step {step} rejected: averaging starts after step {start}")]
    BeforeAveragingStart { step: u64, start: u64 },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("solution blew up at t = {t} (max |q| = {max_abs})")]
    BlowUp { t: f64, max_abs: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("malformed file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QgError>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(QgError::DimensionMismatch { expected, actual })
    }
}
