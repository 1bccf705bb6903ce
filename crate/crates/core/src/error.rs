use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("index {index} out of range for dimension {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not an allowed set: {reason}")]
    NotAllowed {
        reason: String,
        /// A vector violating weak decomposability for the best candidate
        /// restriction norm, when one is known.
        counterexample: Option<Vec<f64>>,
    },

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("inapplicable: lambda {lambda} does not exceed lambda^(S^c) {lambda_sc}")]
    Inapplicable { lambda: f64, lambda_sc: f64 },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-parsable code, used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "E_DIMENSION",
            Error::Parse { .. } => "E_PARSE",
            Error::IndexOutOfRange { .. } => "E_INDEX",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::NotAllowed { .. } => "E_NOT_ALLOWED",
            Error::InvalidCone(_) => "E_CONE",
            Error::Inapplicable { .. } => "E_INAPPLICABLE",
            Error::Budget(_) => "E_BUDGET",
            Error::Io { .. } => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
