use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: bad header: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error("{path}: malformed row at line {line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("trace has no packet events")]
    EmptyTrace,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least 2 samples per group, got {0} and {1}")]
    TooFewSamples(usize, usize),
    #[error("unknown label tag {0:?}")]
    UnknownLabel(String),
    #[error("database is at stage {found}, operation requires {expected}")]
    StageMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("class {0} is missing or has too few rows")]
    MissingClass(String),
    #[error("insufficient rows: {0}")]
    InsufficientRows(String),
    #[error("feature index {index} out of range for m = {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("training data contains non-finite values")]
    NonFiniteInput,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("module {module}: {source}")]
    Module {
        module: String,
        #[source]
        source: Box<Error>,
    },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_module(self, module: impl Into<String>) -> Self {
        Error::Module {
            module: module.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through module attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Module { source, .. } => source.root(),
            e => e,
        }
    }
}
