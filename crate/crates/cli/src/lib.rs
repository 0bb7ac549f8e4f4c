//! Command-line front end: configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config { path, message } => json!({"error": "config", "path": path, "message": message}),
            CliError::Numerical(m) => json!({"error": "numerical", "message": m}),
            CliError::Io { path, message } => json!({"error": "io", "path": path, "message": message}),
            CliError::Acceptance(m) => json!({"error": "acceptance", "message": m}),
        }
    }
}

impl From<mutsel::Error> for CliError {
    fn from(e: mutsel::Error) -> Self {
        match e {
            // bad step sizes, snapshot times etc. are only detectable once the grid exists
            mutsel::Error::InvalidArgument(m) => CliError::Config { path: String::new(), message: m },
            other => CliError::Numerical(other.to_string()),
        }
    }
}
