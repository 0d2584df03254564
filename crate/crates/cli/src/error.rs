use std::fmt;

use credattr::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const DATA: i32 = 2;
    pub const TRAINING: i32 = 3;
    pub const USAGE: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: exit::DATA,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: exit::INTERNAL,
            message: message.into(),
        }
    }

    /// Like the `From` conversion, but divergence and numerical failures
    /// while fitting exit as training errors.
    pub fn training(err: Error) -> Self {
        let code = match err {
            Error::Convergence { .. } | Error::Training { .. } | Error::Numerical(_) => exit::TRAINING,
            ref e => code_for(e),
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::Schema(_)
        | Error::Parse { .. }
        | Error::Data(_)
        | Error::DimensionMismatch { .. }
        | Error::Io(_)
        | Error::Csv(_) => exit::DATA,
        Error::Convergence { .. } | Error::Training { .. } => exit::TRAINING,
        Error::Argument(_) | Error::Exhausted { .. } => exit::USAGE,
        Error::Numerical(_) | Error::Json(_) => exit::INTERNAL,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self {
            code: code_for(&err),
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::data(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        Self::internal(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        Self::data(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;
