//! Error type shared by every fallible operation in the crate.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Why an operation could not produce a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// The caller handed in something structurally unusable: wrong
    /// dimensions, a non-positive temperature on a soft path, an empty
    /// sample, a non-finite input.
    InvalidArgument(String),
    /// The inputs were well formed but floating-point evaluation broke
    /// down: a covariance that is not positive definite to working
    /// precision, a quadrature that failed to converge, an overflow.
    NumericalFailure(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
