use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The reference signal has zero energy, so a ratio against it is undefined.
    #[error("signal has zero energy, {0} is undefined")]
    ZeroSignal(&'static str),

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("enumerating {count} supports exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("no restricted isometry constant of order {order} supplied for {factor}")]
    MissingRicOrder { factor: &'static str, order: usize },
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
