use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// `Numeric` carries the name of the operation that failed so that callers
/// (the CLI in particular) can point at the offending stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
