use std::path::{Path, PathBuf};

/// Failure of a command, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum KglError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error in {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, KglError>;

impl KglError {
    pub fn config(msg: impl std::fmt::Display) -> Self {
        KglError::Config(msg.to_string())
    }

    pub fn input(path: &Path, msg: impl std::fmt::Display) -> Self {
        KglError::Input {
            path: path.to_path_buf(),
            message: msg.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        KglError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn numeric(msg: impl std::fmt::Display) -> Self {
        KglError::Numeric(msg.to_string())
    }

    /// 2 for configuration, 3 for input or file access, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            KglError::Config(_) => 2,
            KglError::Input { .. } | KglError::Io { .. } => 3,
            KglError::Numeric(_) => 4,
        }
    }
}
