use std::path::PathBuf;

/// Crate-wide error type.
///
/// The CLI maps these onto its exit-code contract: usage errors -> 1,
/// data errors -> 2, run failures -> 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("value error: {0}")]
    Value(String),

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("specification error: {0}")]
    Specification(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("environment error: {0}")]
    Environment(String),

    #[error("run failure: {0}")]
    RunFailure(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code bucket for the CLI: 1 usage, 2 data, 3 run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::RunFailure(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
