//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is unusable (degenerate bounds, bad dimension, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Two vectors that must agree in length do not.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A numeric input or intermediate stopped being finite.
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    /// A persisted file could not be decoded.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    /// A persisted file has an unsupported format version.
    #[error("unsupported version {found} in {path} (expected {expected})")]
    VersionMismatch {
        path: String,
        found: u32,
        expected: u32,
    },

    /// An operation was called with an empty batch or buffer.
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown task `{0}` (expected dpend, arm, hopper or cartpole)")]
    UnknownTask(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
