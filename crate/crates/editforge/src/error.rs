//! Error types shared across the pipeline.

use std::path::PathBuf;

use thiserror::Error;

/// Top-level error for pipeline operations.
#[derive(Debug, Error)]
pub enum ForgeError {
    /// Configuration is invalid or incomplete. Maps to exit code 2 in the CLI.
    #[error("config error: {0}")]
    Config(String),

    /// Unrecoverable I/O failure (unreadable input file, unwritable output dir).
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A model reply could not be parsed into the expected structure.
    /// Parse errors are retriable; the retry budget is owned by the pipeline.
    #[error("parse error: {0}")]
    Parse(String),

    /// Backend transport failure, classified retriable / non-retriable.
    #[error(transparent)]
    Backend(#[from] BackendError),

    /// The ledger is missing, locked, or inconsistent.
    #[error("ledger error: {0}")]
    Ledger(String),

    /// Variant routing was asked for a category that has no template.
    #[error("no instruction variant routes category `{0}`")]
    Routing(String),

    /// Balancing targets cannot be met by the accepted pool.
    #[error("balance infeasible: {0}")]
    Infeasible(String),
}

impl ForgeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// True when a retry against the backend might change the outcome.
    pub fn is_retriable(&self) -> bool {
        match self {
            Self::Parse(_) => true,
            Self::Backend(e) => e.is_retriable(),
            _ => false,
        }
    }
}

/// Transport-level backend failure.
#[derive(Debug, Error)]
pub enum BackendError {
    /// HTTP 5xx, timeouts, connection resets, empty replies.
    #[error("retriable backend error: {0}")]
    Retriable(String),

    /// HTTP 4xx-class rejections; retrying will not help.
    #[error("backend rejected request: {0}")]
    NonRetriable(String),

    /// The request did not resolve within the configured timeout.
    #[error("backend call timed out after {0} s")]
    Timeout(u64),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Retriable(_) | Self::Timeout(_))
    }

    /// Classify an HTTP status code the way the retry loop expects.
    pub fn from_status(status: u16, body: String) -> Self {
        if (500..=599).contains(&status) || status == 429 {
            Self::Retriable(format!("http {status}: {body}"))
        } else {
            Self::NonRetriable(format!("http {status}: {body}"))
        }
    }
}

pub type Result<T> = std::result::Result<T, ForgeError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn http_5xx_is_retriable() {
        assert!(BackendError::from_status(503, "busy".into()).is_retriable());
        assert!(BackendError::from_status(429, "slow down".into()).is_retriable());
    }

    #[test]
    fn http_4xx_is_not_retriable() {
        assert!(!BackendError::from_status(401, "no key".into()).is_retriable());
        assert!(!BackendError::from_status(400, "bad body".into()).is_retriable());
    }

    #[test]
    fn parse_errors_are_retriable() {
        assert!(ForgeError::Parse("no json".into()).is_retriable());
        assert!(!ForgeError::Config("bad".into()).is_retriable());
    }
}
