use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants map onto the machine-readable codes returned by the HTTP
/// service (see [`Error::code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("snapshot corrupted: {0}")]
    Corruption(String),

    #[error("unsupported snapshot format: {0}")]
    UnsupportedFormat(String),

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("llm unavailable: {0}")]
    LlmUnavailable(String),

    #[error("external model error: {0}")]
    External(String),

    #[error("image decode error: {0}")]
    Image(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable snake_case code used in wire responses.
    pub fn code(&self) -> String {
        match self {
            Error::Argument(_) => "invalid_argument".into(),
            Error::NotFound { kind, .. } => format!("{kind}_not_found"),
            Error::State(_) => "invalid_state".into(),
            Error::Corruption(_) => "snapshot_corrupted".into(),
            Error::UnsupportedFormat(_) => "unsupported_format".into(),
            Error::Planning(_) => "planning_failed".into(),
            Error::LlmUnavailable(_) => "llm_unavailable".into(),
            Error::External(_) => "external_model_error".into(),
            Error::Image(_) => "image_decode_error".into(),
            Error::Io { .. } => "io_error".into(),
            Error::Json(_) => "json_error".into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
