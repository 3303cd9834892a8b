use std::path::{Path, PathBuf};

use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] nnmass_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        source: nnmass_core::Error,
    },
    #[error("{path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_file(path: &Path, source: nnmass_core::Error) -> Self {
        Error::InFile {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(e) | Error::InFile { source: e, .. } => e.code(),
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Input(_) => "input",
        }
    }

    /// `{code, message, context}` as written to stderr by the binary.
    pub fn to_json(&self) -> Value {
        let context = match self {
            Error::Io { path, .. }
            | Error::Json { path, .. }
            | Error::Csv { path, .. }
            | Error::Checkpoint { path, .. } => json!({ "path": path }),
            Error::InFile { path, source } => match source {
                nnmass_core::Error::Format { part, .. } => json!({ "path": path, "part": part.to_string() }),
                _ => json!({ "path": path }),
            },
            Error::Core(nnmass_core::Error::Infeasible { target, min, max }) => {
                json!({ "target": target, "min": min, "max": max })
            }
            Error::Core(nnmass_core::Error::Divergence {
                epoch,
                last_finite_epoch,
            }) => json!({ "epoch": epoch, "last_finite_epoch": last_finite_epoch }),
            _ => json!({}),
        };
        json!({ "code": self.code(), "message": self.to_string(), "context": context })
    }
}
