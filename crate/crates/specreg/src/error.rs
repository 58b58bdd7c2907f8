use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iteration index outside the configured candidate set.
    #[error("index error: {0}")]
    Index(String),

    /// Input is degenerate (zero operator, empty system, dependent columns).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A configuration value violates a precondition of the method.
    #[error("config error: {0}")]
    Config(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// File I/O failure, annotated with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the batch CLI: 2 for configuration problems,
    /// 3 for numeric/domain failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 1,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
