use thiserror::Error;

use crate::dsl::{EvalError, ParseError};

/// Errors surfaced by the numerical modules.
///
/// Non-convergence is deliberately *not* an error: solvers return their best
/// iterate together with a status flag so callers can still report it.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("space/model mismatch: {0}")]
    Mismatch(String),
    #[error("malformed input: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
