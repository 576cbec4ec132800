//! Error type shared across the crate.

use std::fmt;

/// Errors raised by the analytic, sampling, and optimization routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    Domain(String),
    /// A configuration value is structurally invalid (lengths, ranges, flags).
    Config(String),
    /// The requested system size or case index has no analytic formula.
    Unsupported(String),
    /// An infinite series failed to reach the requested tolerance.
    NonConvergence { terms_used: usize },
    /// An equal-BER root could not be bracketed; carries the scanned gap profile.
    Infeasible { profile: Vec<(f64, f64)> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::NonConvergence { terms_used } => {
                write!(f, "series did not converge within {terms_used} terms")
            }
            Error::Infeasible { profile } => {
                write!(f, "no sign change bracketed over {} scanned points", profile.len())
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
