//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Noise calibration could not satisfy the requested privacy target.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A configuration value violates its documented constraints.
    #[error("config error: {0}")]
    Config(String),

    /// An internal contract between pipeline stages was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A requested policy has no valid privacy proof.
    #[error("unsafe policy: {0}")]
    UnsafePolicy(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
