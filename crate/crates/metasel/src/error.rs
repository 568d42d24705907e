use std::path::PathBuf;

use serde::Serialize;

/// Errors surfaced by file handling and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A malformed cell or record in an input file.
    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based line number in the file.
        row: u64,
        column: String,
        message: String,
    },
    /// A file-level schema problem (missing columns, empty file, ...).
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),
    #[error(transparent)]
    Core(#[from] metasel_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for invalid inputs or configuration, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Schema { .. } | CliError::Config(_) => 1,
            CliError::Core(
                metasel_core::Error::InvalidTable(_)
                | metasel_core::Error::InvalidRecord(_)
                | metasel_core::Error::InvalidConfig(_)
                | metasel_core::Error::NonFinite { .. },
            ) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Schema { .. } => "schema",
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::MissingArtifacts(_) => "missing_artifacts",
            CliError::Core(_) => "core",
            CliError::Runtime(_) => "runtime",
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
            #[serde(skip_serializing_if = "Option::is_none")]
            row: Option<u64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            column: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            missing: Option<&'a [String]>,
        }
        let (row, column) = match self {
            CliError::Parse { row, column, .. } => (Some(*row), Some(column.as_str())),
            _ => (None, None),
        };
        let missing = match self {
            CliError::MissingArtifacts(m) => Some(m.as_slice()),
            _ => None,
        };
        serde_json::to_string(&Report {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
            row,
            column,
            missing,
        })
        .expect("error report serializes")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
