use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("mask selects no features")]
    EmptyMask,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("cannot split {n} rows into {k} folds")]
    TooFewRows { n: usize, k: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("missing site: {0}")]
    MissingSite(String),
}

pub type Result<T> = core::result::Result<T, Error>;

/// A non-fatal condition surfaced to the caller instead of being logged,
/// since the core crate has no logger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning(pub String);

impl core::fmt::Display for Warning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}
