//! Error type shared across the workspace.
//!
//! Variants map onto the CLI exit codes: config/validation problems exit
//! with 2, numerical/conditioning failures with 3, I/O with 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected configuration input: unknown key, unparsable value or a
    /// violated model invariant.
    #[error("config: {0}")]
    Config(String),

    /// Arguments that break an operation contract (negative variance,
    /// mismatched lengths, out-of-range decimation factor, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Numerical failure: singular covariance after ridge, residual too
    /// large, non-finite intermediate.
    #[error("numerical: {0}")]
    Numerical(String),

    /// Filesystem problems while reading configs or writing tables.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
