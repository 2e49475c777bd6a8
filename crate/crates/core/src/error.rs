use std::path::PathBuf;

/// Errors produced anywhere in the clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("activation tape does not match: {0}")]
    TapeMismatch(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("row {row} is the zero vector; cosine distance is undefined")]
    ZeroVector { row: usize },

    #[error("k = {k} is invalid for {n} points (need 1 <= k < n)")]
    InvalidK { k: usize, n: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged ({stage}, epoch {epoch}): non-finite loss")]
    Divergence { stage: String, epoch: usize },

    #[error("minibatch must contain at least one edge")]
    EmptyMinibatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing log file {0}")]
    MissingLog(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Short machine-readable category, used by the CLI's diagnostic prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NonFinite { .. } => "non-finite",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::TapeMismatch(_) => "tape-mismatch",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::ZeroVector { .. } => "zero-vector",
            Error::InvalidK { .. } => "invalid-k",
            Error::Degenerate(_) => "degenerate",
            Error::Divergence { .. } => "divergence",
            Error::EmptyMinibatch => "empty-minibatch",
            Error::InvalidConfig(_) => "config",
            Error::MissingLog(_) => "missing-log",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
