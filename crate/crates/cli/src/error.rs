use std::path::PathBuf;

use thiserror::Error;

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for runtime failures not covered by a solver status.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("cannot {action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] nls4_core::Error),
}

impl CliError {
    /// A core validation error raised while converting the config section `key`.
    pub fn invalid(key: &str, err: nls4_core::Error) -> Self {
        CliError::Config {
            key: key.into(),
            message: err.to_string(),
        }
    }

    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}
