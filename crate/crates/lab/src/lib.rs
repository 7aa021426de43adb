//! Experiment drivers and the verification checklist behind the
//! `softgate` binary.
//!
//! Each driver builds its models from `softgate-core`, runs the seeded
//! Monte Carlo estimates, and writes a CSV, a full-precision JSON summary,
//! a plain-text table, and plot-ready data files into the output
//! directory. Everything is deterministic: the same config and seed give
//! byte-identical artifacts.

use std::fmt;

pub mod config;
pub mod exp1;
pub mod exp2;
pub mod exp3;
pub mod report;
pub mod verify;

/// Why a run stopped, carrying the documented process exit code:
/// 1 for an invalid configuration or unusable environment, 2 for a failed
/// invariant, 3 for a numerical failure inside an estimator.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config file, or output location.
    Config(String),
    /// A checked invariant did not hold.
    Invariant(String),
    /// An estimator or factorization broke down.
    Numerical(String),
}

impl Failure {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Invariant(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "invalid config: {msg}"),
            Failure::Invariant(msg) => write!(f, "invariant failure: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<softgate_core::Error> for Failure {
    fn from(e: softgate_core::Error) -> Self {
        match e {
            softgate_core::Error::InvalidArgument(msg) => Failure::Config(msg),
            softgate_core::Error::NumericalFailure(msg) => Failure::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("io error: {e}"))
    }
}

/// Guards the "every probability field lies in [0, 1]" record invariant.
pub(crate) fn check_prob(name: &str, p: f64) -> Result<f64, Failure> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Failure::Invariant(format!(
            "{name} = {p} is not a probability"
        )))
    }
}
