use thiserror::Error;

/// Errors shared by every module of the workbench.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },

    #[error("line {line}: unknown symbol `{symbol}`")]
    UnknownSymbol { line: usize, symbol: String },

    #[error("line {line}: {message}")]
    KindViolation { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("machine is not functional: {0}")]
    NotFunctional(String),

    #[error("bound exceeded: {0}")]
    BoundExceeded(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
