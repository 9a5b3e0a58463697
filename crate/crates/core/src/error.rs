use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid alignment error: {0}")]
    Alignment(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing country weights for: {}", .0.join(", "))]
    MissingWeights(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::MissingWeights(_) => ErrorClass::Config,
            Error::Schema { .. }
            | Error::Ordering(_)
            | Error::Empty(_)
            | Error::InsufficientData(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::Domain(_)
            | Error::Range(_)
            | Error::Alignment(_)
            | Error::Calibration(_)
            | Error::DegenerateFit(_) => ErrorClass::Numeric,
            Error::Io { .. } => ErrorClass::Io,
        }
    }
}
