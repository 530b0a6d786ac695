use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by corpus ingestion, distance computation, training and
/// evaluation. File-level errors carry enough context (path, row, column)
/// to locate the offending cell.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{file}:{row}:{col}: {message}")]
    Csv {
        file: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("{file}:{row}:{col}: non-finite value {value}")]
    NonFinite {
        file: PathBuf,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("{file}: expected {expected} channels, found {found}")]
    ChannelMismatch {
        file: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unknown label {label:?}; declared classes: {declared:?}")]
    UnknownLabel { label: String, declared: Vec<String> },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("band radius {radius} admits no warping path for lengths {len_a} and {len_b}")]
    BandTooNarrow {
        radius: usize,
        len_a: usize,
        len_b: usize,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("{path}: malformed table cache: {message}")]
    TableCache { path: PathBuf, message: String },
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 training, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::TableCache { .. } => 4,
            Error::Training(_) => 3,
            _ => 2,
        }
    }
}
