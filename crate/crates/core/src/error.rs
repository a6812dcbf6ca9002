//! Error type shared across the crate.
//!
//! Variants map onto the CLI exit codes: configuration problems exit 2,
//! data problems exit 3, numeric failures exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown columns, invalid fractions, mismatched runs.
    #[error("config error: {0}")]
    Config(String),

    /// Bad data: missing classes, empty columns, malformed targets.
    #[error("data error: {0}")]
    Data(String),

    /// A cell that failed to parse, reported with its 1-based data row.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Non-finite values encountered during optimization.
    #[error("numeric error at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    /// Caller violated an API contract (shape mismatch, bad index).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Parse { .. } | Error::Io(_) => 3,
            Error::Numeric { .. } | Error::Contract(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
