use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the model, samplers, sweep harness and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell ({row}, {col}) is outside a {rows}x{cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("enumeration needs {required} states but the cap is {cap}")]
    EnumerationCap { required: u128, cap: u64 },

    #[error("loss baseline undefined: no agricultural parcels in the optimal map at delta = 0 (P_S = {ps})")]
    UndefinedBaseline { ps: f64 },

    #[error("result store: {0}")]
    Store(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn ingestion(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }
}
