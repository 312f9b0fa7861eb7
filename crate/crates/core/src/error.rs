use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the mapping pipeline.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto
/// stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Dimension(_) | Error::Domain(_) | Error::Numeric(_) | Error::Contract(_) => {
                ErrorKind::Numeric
            }
            Error::Degenerate(_)
            | Error::Format { .. }
            | Error::Lookup(_)
            | Error::Data(_)
            | Error::Evaluation(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}
