use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Bad magic, unsupported version or malformed header.
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter or longer than the header declares.
    #[error("length error: {0}")]
    Length(String),

    /// Labels, catalogs or dimensions contradict each other.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite value or gradient; `iterate` is the point that produced it.
    #[error("numerical error: {message}")]
    Numerical { message: String, iterate: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("run failed for condition {condition}, seed {seed}: {source}")]
    Run {
        condition: String,
        seed: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(message: impl Into<String>, iterate: Vec<f64>) -> Self {
        Error::Numerical {
            message: message.into(),
            iterate,
        }
    }
}
