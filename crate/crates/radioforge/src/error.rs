//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration problems: unknown keys, out-of-range values, missing
    /// referenced files. These are user errors, not I/O failures.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed input data (WAV, OSM, SigMF, annotation files).
    #[error("parse error: {0}")]
    Parse(String),

    /// A signal-processing precondition was violated.
    #[error("signal error: {0}")]
    Signal(String),

    /// Scheduling could not satisfy the band or time constraints.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// Dataset validation found rule violations. Each entry is one finding.
    #[error("validation failed with {} finding(s)", .0.len())]
    Validation(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn signal(msg: impl Into<String>) -> Self {
        Error::Signal(msg.into())
    }
}
