use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration.
    #[error("{0}")]
    Usage(String),
    /// A computation failed or a validation check did not pass.
    #[error("{0}")]
    Physics(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn physics<E: std::fmt::Display>(e: E) -> Self {
        CliError::Physics(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Physics(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}
