use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A denominator vanished while evaluating a closed form.
    #[error("singular evaluation of {what} at {at}")]
    Singular { what: String, at: String },

    /// A Pochhammer factor in a denominator vanished before the series terminated.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("parameter range violated: {0}")]
    Range(String),

    /// A q-parameter is not an integer power of the base q.
    #[error("{0} is not an integer power of q")]
    NotRepresentable(String),

    #[error("sign definiteness violated: {0}")]
    SignViolation(String),

    #[error("not a polynomial in eta: {0}")]
    NotPolynomial(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    /// Two routes that must agree exactly did not.
    #[error("inconsistent results: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn singular(what: impl Into<String>, at: impl std::fmt::Display) -> Self {
        Error::Singular { what: what.into(), at: at.to_string() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
