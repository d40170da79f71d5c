use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("input outside domain: {0}")]
    Domain(String),
    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An integral that must be finite diverges (or cannot be shown finite).
    #[error("integral does not converge: {0}")]
    Integrability(String),
    /// The truncated tail of a radial integral has no certified bound.
    #[error("uncertified tail: {0}")]
    UncertifiedTail(String),
    /// The input makes the requested quantity meaningless (e.g. a zero denominator).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Array shapes or lengths disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed data: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
