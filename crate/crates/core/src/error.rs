use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("filter error: {0}")]
    Filter(String),

    #[error("domain error in column {column}: {message}")]
    Domain { column: usize, message: String },

    #[error("shape error: expected {expected} columns, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("oversampling error: {0}")]
    Oversampling(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human readable location, e.g. `treatment swift, seed 3`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the caller's configuration rather than by the run itself.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Param(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
