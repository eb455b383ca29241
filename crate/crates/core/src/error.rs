//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file header: bad magic, unsupported version, wrong model tag.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid numeric content: non-finite values, broken invariants.
    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Iterative solver ran out of iterations. Carries the last iterate so
    /// callers can degrade gracefully instead of dropping the sample.
    #[error("{context}: no convergence (residual {residual:.3e})")]
    Convergence {
        context: String,
        residual: f64,
        iterate: Vec<f64>,
    },
}
