use thiserror::Error;

/// Errors produced by the codec, builder and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("prefix length {requested} exceeds the {available} available generator rows")]
    NotEnoughRows { requested: usize, available: usize },

    #[error("prefix length {n} is shorter than the message length {k}")]
    Underdetermined { n: usize, k: usize },

    #[error("invalid bit string: {0}")]
    InvalidBits(String),

    #[error("unsupported message length k={k}: {reason}")]
    UnsupportedK { k: usize, reason: &'static str },

    #[error("no candidate row satisfies the split and elevation constraints at n={n}")]
    RowSearchExhausted { n: usize },

    #[error("target length {target} is shorter than the current matrix ({current} rows)")]
    ShrinkRequested { target: usize, current: usize },

    #[error("matrix file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outer decoding failed: {0}")]
    OuterDecode(#[from] crate::outer::DecodeFailure),
}

pub type Result<T> = std::result::Result<T, Error>;
