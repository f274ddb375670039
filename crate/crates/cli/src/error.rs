use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed input record; `line` is 1-based and counts the header.
    #[error("{}, line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },

    #[error(transparent)]
    Core(#[from] prisel::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Core(prisel::Error::NotConverged { .. }) => "not_converged",
            CliError::Core(_) => "input",
            CliError::Json(_) => "serialization",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable report written to stderr on failure.
    pub fn report(&self) -> serde_json::Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Parse { path, line, .. } = self {
            body["path"] = json!(path);
            body["line"] = json!(line);
        }
        if let CliError::Core(prisel::Error::Replication { rep, .. }) = self {
            body["rep"] = json!(rep);
        }
        json!({ "error": body })
    }
}

pub type CliResult<T> = Result<T, CliError>;
