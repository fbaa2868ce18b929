use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text. `line` is 1-based when known (0 otherwise),
    /// `column` is a 0-based character offset into the line.
    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(column: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line: 0,
            column,
            message: message.into(),
        }
    }

    /// Attach a 1-based line number to a format error.
    pub fn at_line(self, line: usize) -> Self {
        match self {
            Error::Format {
                column, message, ..
            } => Error::Format {
                line,
                column,
                message,
            },
            other => other,
        }
    }
}
