use thiserror::Error;

/// Errors produced by ingestion, builds, and queries.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input record; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid argument or query (unknown region, bad range, ...).
    #[error("{0}")]
    Validation(String),

    /// The request exceeds what the structure was built to answer.
    #[error("{0}")]
    Capability(String),

    /// A build would exceed a configured resource budget.
    #[error("{what}: needs {required} but budget is {budget}")]
    Resource {
        what: String,
        required: u64,
        budget: u64,
    },

    /// Corrupt or incompatible snapshot data.
    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
