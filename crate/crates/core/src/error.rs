use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("parse error: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Not enough unused instances of `class` to fill the requested bags.
    #[error("insufficient instances of class {class}: need {needed}, {available} available")]
    Capacity {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
