use std::fmt;

use labelprobe::Error;

/// Invalid input data or a failed validation check.
pub const DATA: u8 = 1;
pub const USAGE: u8 = 2;
/// Numerical trouble or an environment problem such as an unwritable path.
pub const RUNTIME: u8 = 3;

/// An error that knows which exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: DATA,
            error: error.into(),
        }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: USAGE,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: RUNTIME,
            error: error.into(),
        }
    }

    pub fn context(self, message: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            code: self.code,
            error: self.error.context(message),
        }
    }
}

fn code_of(error: &Error) -> u8 {
    match error {
        Error::Config(_) => USAGE,
        Error::Numerical { .. } | Error::Io { .. } => RUNTIME,
        Error::Run { source, .. } => code_of(source),
        _ => DATA,
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self {
            code: code_of(&error),
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
