use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors produced by the detection, fitting and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    /// Malformed model container; `field` names the offending entry.
    #[error("model format error in `{field}`: {reason}")]
    ModelFormat { field: &'static str, reason: String },

    /// Input records that fail validation before any geometry runs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Geometry too degenerate to continue; `stage` names the failing step.
    #[error("degenerate geometry in {stage}: {reason}")]
    Degenerate { stage: &'static str, reason: String },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn model(field: &'static str, reason: impl Into<String>) -> Self {
        Error::ModelFormat {
            field,
            reason: reason.into(),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidInput(reason.into())
    }

    pub fn degenerate(stage: &'static str, reason: impl Into<String>) -> Self {
        Error::Degenerate {
            stage,
            reason: reason.into(),
        }
    }

    /// Process exit code for CLI consumers: 2 for input errors, 3 for
    /// degenerate geometry.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
