use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: no edges")]
    EmptyEdgeList(PathBuf),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("negative sampling exhausted its retry cap ({0} attempts for one slot); target relation too dense")]
    SamplingExhausted(usize),

    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("graph hash mismatch: checkpoint was trained on {expected}, bundle is {found}")]
    GraphMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's inputs rather than by the computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyEdgeList(_)
            | Error::InvalidInput(_)
            | Error::Unknown { .. }
            | Error::GraphMismatch { .. }
            | Error::Format(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Fold { source, .. } => source.is_input_error(),
            Error::Dimension(_) | Error::Numeric(_) | Error::UndefinedMetric(_) | Error::SamplingExhausted(_) => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
