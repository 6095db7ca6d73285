use thiserror::Error;

/// Errors raised across the estimation and evaluation pipeline.
#[derive(Debug, Error)]
pub enum FilamentError {
    #[error("invalid {field}: {value} (must be finite and within [{min}, {max}])")]
    Domain { field: &'static str, value: f64, min: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("density threshold {tau:e} leaves no mesh points")]
    ThresholdTooHigh { tau: f64 },

    #[error("every mesh point was stranded far from the data")]
    EmptyResult,

    #[error("ridge set is empty")]
    EmptyRidges,

    #[error("unsupported filament kind for this operation: {0}")]
    UnsupportedKind(&'static str),

    #[error("input file not found: {0}")]
    MissingFile(String),

    #[error("column {0:?} not present in CSV header")]
    MissingColumn(String),

    #[error("malformed CSV header: {0}")]
    MalformedHeader(String),

    #[error("malformed label mapping at line {line}: {reason}")]
    Mapping { line: usize, reason: String },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FilamentError> = std::result::Result<T, E>;

impl FilamentError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        FilamentError::Parameter(msg.into())
    }
}
