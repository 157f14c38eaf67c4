#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("stale tape: {0}")]
    StaleTape(String),
    #[error("dataset schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("missing column '{0}' in dataset")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
