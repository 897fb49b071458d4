use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants are grouped by who is at fault: the caller passing an
/// argument outside an operation's domain, a broken internal contract, a
/// model that violates a mathematical assumption, or a malformed input file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("measure has no mass above {0}")]
    NoMass(f64),

    #[error("value {value} lies outside the tabulated range [{lo}, {hi}]")]
    Extrapolation { value: f64, lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
