use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the erasure library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative argument {0} outside the support [0, inf)")]
    Domain(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error(
        "{bits}-bit arithmetic is insufficient for this series (result {value:e}, \
         error bound {bound:e}); raise precision_bits"
    )]
    InsufficientPrecision { bits: u32, value: f64, bound: f64 },

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
