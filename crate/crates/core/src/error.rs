use thiserror::Error;

/// Errors raised by the decomposition, matching and imaging routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("SVD did not converge within {iterations} iterations")]
    SvdNotConverged { iterations: usize },

    #[error("patch at ({row}, {col}) with side {side} lies outside a {height}x{width} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        side: usize,
        height: usize,
        width: usize,
    },

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    Uncovered { row: usize, col: usize },

    #[error("image has no observed pixels")]
    NothingObserved,

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("malformed image: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
