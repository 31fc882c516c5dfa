use thiserror::Error;

/// Errors shared by every module in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("data length {actual} does not match {channels}x{height}x{width} = {expected}")]
    DataLength {
        channels: usize,
        height: usize,
        width: usize,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("height and width must be even, got {height}x{width}")]
    OddDimensions { height: usize, width: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("invalid filter text: {0}")]
    FilterParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
