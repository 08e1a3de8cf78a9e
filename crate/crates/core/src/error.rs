use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the audit toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A generation or split specification violates its documented bounds.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A dataset split could not be performed as requested.
    #[error("split error: {0}")]
    Split(String),

    /// CSV ingestion failed; `row` is the 1-based data row.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// A group predicate does not apply to the data it was evaluated on.
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Prediction representation does not match the requested score kind,
    /// or fails its own invariants.
    #[error("representation error: {0}")]
    Representation(String),

    /// An operation that requires data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Model fitting failed; reports the iteration at which it happened.
    #[error("fit error at iteration {iteration}: {msg}")]
    Fit { iteration: usize, msg: String },

    /// A fixed-level model was asked for a level it was not trained on.
    #[error("unsupported quantile level {level}")]
    UnsupportedLevel { level: f64 },

    /// Shadow membership masks could not satisfy the in/out coverage
    /// constraint; more shadow models are needed.
    #[error("shadow mask constraint unsatisfiable after {retries} retries; increase the shadow count")]
    MaskConstraint { retries: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
