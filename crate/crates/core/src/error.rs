use std::path::PathBuf;

/// Errors produced by the weightzoo pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A shape, range, or precondition check failed.
    #[error("validation: {0}")]
    Validation(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its contents were malformed.
    #[error("parse: {0}")]
    Parse(String),

    /// A file carried a format version this build does not understand.
    #[error("version: {0}")]
    Version(String),

    /// A metric is mathematically undefined for the given inputs.
    #[error("undefined score: {0}")]
    UndefinedScore(String),

    /// Training produced a non-finite loss, gradient, or update.
    #[error("numeric instability: {0}")]
    Unstable(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::Version(_) => "version",
            Error::UndefinedScore(_) => "undefined_score",
            Error::Unstable(_) => "unstable",
            Error::Json(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
