use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no stationary distribution: delta = {delta} <= 1 lets an infinite buffer grow without bound")]
    NoStationaryDistribution { delta: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("numeric instability in {context}: about {digits_lost:.1} decimal digits lost to cancellation")]
    NumericInstability { context: String, digits_lost: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("malformed serialized data: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
