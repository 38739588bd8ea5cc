use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Malformed input: dimension mismatch, empty generator list, bad rational.
    #[error("input error: {0}")]
    Input(String),
    /// A documented precondition of an operation does not hold at the given data.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// No guard of a piecewise node holds at the evaluation point.
    #[error("expression undefined at point ({point})")]
    Undefined { point: String },
    /// Gradient requested at a kink or guard boundary.
    #[error("nonsmooth point: {node}")]
    Nonsmooth { node: String },
    /// The expression is outside the fragment an operation accepts.
    #[error("{fragment}: {reason}")]
    Fragment { fragment: &'static str, reason: String },
    /// Operation refuses inputs beyond an enumeration bound.
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
