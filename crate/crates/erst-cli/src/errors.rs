//! Error channel with the exit-code contract.
//!
//! Shell pipelines branch on the code: 0 success, 2 bad input (files,
//! flags, labels, shapes), 3 numeric precondition (non-PD covariance and
//! friends), 4 infeasible request (unreachable target), 5 failed report
//! self-audit. Usage errors from the argument parser also exit 2.

use std::fmt;

use erst_core::ErstError;

/// A failed command, carrying which exit-code class it belongs to.
#[derive(Debug)]
pub enum CliError {
    /// Bad file, flag, label or shape: exit 2.
    Input(String),
    /// A numeric precondition of the engine failed: exit 3.
    Numeric(ErstError),
    /// The request is well-posed but unreachable: exit 4.
    Infeasible(ErstError),
    /// A printed result failed its in-process re-evaluation: exit 5.
    Audit(String),
}

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Audit(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Infeasible(e) => write!(f, "{e}"),
            CliError::Audit(msg) => write!(f, "self-audit failed: {msg}"),
        }
    }
}

impl From<ErstError> for CliError {
    fn from(e: ErstError) -> Self {
        match e {
            ErstError::InvalidInput(_)
            | ErstError::DimensionMismatch { .. }
            | ErstError::NonFinite(_)
            | ErstError::MissingBetas => CliError::Input(e.to_string()),
            ErstError::UnreachableTarget { .. } | ErstError::Infeasible(_) => {
                CliError::Infeasible(e)
            }
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
