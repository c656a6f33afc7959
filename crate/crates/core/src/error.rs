use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("column specs must contain exactly one target column, found {0}")]
    TargetCount(usize),

    #[error("log transform on column `{column}` requires strictly positive values, saw {value}")]
    NonPositiveLog { column: String, value: f64 },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid split fraction {fraction} for {n_rows} rows (train or test would be empty)")]
    InvalidSplit { fraction: f64, n_rows: usize },

    #[error("leaf size {leaf_size} is invalid for {n_rows} training rows")]
    InvalidLeafSize { leaf_size: usize, n_rows: usize },

    #[error("isolation forest subsample must be at least 2, got {0}")]
    InvalidSubsample(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown segment id {0}")]
    UnknownSegment(usize),

    #[error("matrix not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("model document error: {0}")]
    Document(String),

    #[error("unsupported schema version {found} (this build reads up to {supported})")]
    SchemaVersion { found: u32, supported: u32 },

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
