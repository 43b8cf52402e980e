use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry, operator, generation and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("adjoint leaked an imaginary part of {imag:e} (limit {limit:e})")]
    ImaginaryLeak { imag: f64, limit: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("infeasible density: achieved cell sizes {achieved:?}, requested {requested:?}")]
    InfeasibleDensity {
        achieved: Vec<usize>,
        requested: Vec<usize>,
    },

    #[error("step-size estimation failed: {0}")]
    StepSize(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("malformed {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
