use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration (missing root, overlapping splits, bad endpoint URL).
    #[error("configuration error: {0}")]
    Config(String),

    /// A structured record failed validation. `locator` points at the offending record.
    #[error("validation error at {locator}: {message}")]
    Validation { locator: String, message: String },

    /// Something the process needs from its environment is missing (e.g. the linter binary).
    #[error("environment error: {0}")]
    Environment(String),

    /// The linter ran but produced output we cannot interpret.
    #[error("linter protocol error: {message}")]
    OracleProtocol { message: String, raw: String },

    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    #[error("gateway error for {instance}: {message}")]
    Gateway { instance: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON at {locator}: {source}")]
    Json {
        locator: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(locator: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            locator: locator.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's configuration or input rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Validation { .. })
    }
}
