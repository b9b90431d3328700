use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A caller broke a documented precondition (for example, passing a
    /// partially observed vector where a complete one is required).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("invalid split: threshold {threshold} is not strictly inside ({lower}, {upper}) on feature {feature}")]
    InvalidSplit {
        feature: usize,
        threshold: f64,
        lower: f64,
        upper: f64,
    },

    /// The parent probability on the path to a node vanished, so the product
    /// representation is undefined.
    #[error("degenerate path: zero parent probability at node {0}")]
    DegeneratePath(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input data violates a requirement (missing response values, empty data).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("model file (version {version}): {message}")]
    ModelFormat { version: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
