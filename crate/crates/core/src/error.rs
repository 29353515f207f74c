use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate distribution: {classes} class(es), need at least 2")]
    DegenerateDistribution { classes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch in `{field}`: expected {expected} values, found {actual}")]
    ShapeMismatch {
        field: String,
        expected: usize,
        actual: usize,
    },

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: u32,
        classes: usize,
    },

    #[error("non-finite value in `{field}` at index {index}")]
    NonFinite { field: String, index: usize },

    #[error("bundle format error: {0}")]
    Format(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("untrainable target: error labels contain a single class ({0})")]
    UntrainableTarget(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("insufficient data for class {class}: {reason}")]
    InsufficientData { class: usize, reason: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate ensemble: {members} member(s), need at least 2")]
    DegenerateEnsemble { members: usize },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("output directory {0} exists and is not empty")]
    OutputExists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
