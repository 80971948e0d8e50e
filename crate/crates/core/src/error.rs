use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("dimension overflow: {height}x{width}x{channels}")]
    DimensionOverflow {
        height: u32,
        width: u32,
        channels: u32,
    },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient {index} value {value} outside representable range +/-{limit}")]
    OutOfRange {
        index: usize,
        value: i64,
        limit: i64,
    },

    #[error("scale {scale} at index {index} needs {length} trit planes (max {max})")]
    ScaleTooLarge {
        index: usize,
        scale: f64,
        length: u32,
        max: u32,
    },

    #[error("budget {budget} bytes is below the {required}-byte header and side information")]
    BudgetTooSmall { budget: usize, required: usize },

    #[error("range coder contract violation: {0}")]
    Coder(String),

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("logits schema error: {0}")]
    Schema(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
