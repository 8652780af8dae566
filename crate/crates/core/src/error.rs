use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column {0:?} not found in header")]
    MissingTargetColumn(String),
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("kurtosis undefined: {0}")]
    UndefinedKurtosis(&'static str),
    #[error("feature dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least 2 distinct target values, found {0}")]
    TooFewDistinctTargets(usize),
    #[error("no pairs: every training target is identical")]
    NoPairs,
    #[error("unknown training instance id {0}")]
    UnknownInstance(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown estimator {0:?}")]
    UnknownEstimator(String),
    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
