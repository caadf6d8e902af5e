use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("no convergence after {iterations} iterations (last gradient norm {last_gradient_norm:e})")]
    Convergence {
        iterations: usize,
        last_gradient_norm: f64,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("arithmetic error: {0}")]
    Arithmetic(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::Precondition(_) => "precondition",
            Error::Calibration(_) => "calibration",
            Error::Configuration(_) => "configuration",
            Error::Convergence { .. } => "convergence",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Arithmetic(_) => "arithmetic",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Io { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
