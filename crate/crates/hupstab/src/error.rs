use thiserror::Error;

use crate::exact_algebra::Parity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parity mismatch: cannot add an {0} function to an {1} function")]
    ParityMismatch(Parity, Parity),

    #[error("expected an {expected} function, got an {found} one")]
    WrongParity { expected: Parity, found: Parity },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned pencil: {0}")]
    Conditioning(String),

    #[error("unsupported sector: {0}")]
    UnsupportedSector(String),

    #[error("undefined scaling parameter: {0}")]
    UndefinedLambda(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid function spec at line {line}, column {column}: {message}")]
    Spec { line: usize, column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
