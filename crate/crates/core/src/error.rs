use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A line that is not valid JSON (or otherwise unparseable).
    #[error("{}:{line}: malformed record: {msg}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Valid JSON that does not match the expected record schema.
    #[error("{}:{line}: schema violation: {msg}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("missing embedding for text {0:?}")]
    MissingEmbedding(String),

    #[error("embedding backend error: {0}")]
    Backend(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stdio(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::Dimension { expected, got }
    }

    /// Stable short name of the variant, used in one-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Config(_) => "config",
            Error::InvalidInput(_) => "input",
            Error::Format { .. } | Error::Json(_) => "format",
            Error::Schema { .. } => "schema",
            Error::MissingEmbedding(_) => "missing-embedding",
            Error::Backend(_) => "backend",
            Error::Io { .. } | Error::Stdio(_) => "io",
        }
    }
}
