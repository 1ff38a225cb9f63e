use std::fmt;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("identifiability error: column `{column}` is linearly dependent on the preceding design columns")]
    Identifiability { column: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("GEE did not converge in {iterations} iterations (last relative change {last_change:.3e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("degenerate correlation structure: {0}")]
    DegenerateStructure(String),

    #[error("degenerate covariance: contrast variance for candidate `{candidate}` is not positive")]
    DegenerateCovariance { candidate: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation harness error: {0}")]
    Harness(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Configuration,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Configuration => 4,
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::Input => "input",
            ErrorClass::Numerical => "numerical",
            ErrorClass::Configuration => "configuration",
        })
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Integrity(_)
            | Error::Input(_)
            | Error::Io(_) => ErrorClass::Input,
            Error::Identifiability { .. }
            | Error::Numerical(_)
            | Error::NotConverged { .. }
            | Error::DegenerateStructure(_)
            | Error::DegenerateCovariance { .. }
            | Error::Harness(_) => ErrorClass::Numerical,
            Error::Config(_) => ErrorClass::Configuration,
        }
    }
}
