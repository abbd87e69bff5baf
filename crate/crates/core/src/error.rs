//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset handling, model fitting, and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: invariant violated: {message}")]
    Invariant {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("episode invalid: {0}")]
    InvalidEpisode(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("training set has no episode of class {0}")]
    MissingClass(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("model file corrupt: {0}")]
    CorruptModel(String),

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
