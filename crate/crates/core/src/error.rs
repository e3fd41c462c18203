use thiserror::Error;

/// Errors raised by the kernels, schedules, engines and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A power schedule with exponent `nu <= 1` has no finite total mass.
    #[error("power schedule diverges for nu = {0} (need nu > 1)")]
    DivergentSeries(f64),

    /// Caller violated a structural contract (length mismatch, empty pool, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    /// An experiment configuration is invalid; `key` names the offending field.
    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
