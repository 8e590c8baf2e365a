use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or mismatched input (dimensions, domains, probabilities).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Mechanism, analyst, or experiment configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// The analyst/mechanism interaction broke its contract.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The requested operation is not defined for this mechanism or tail family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The exact oracle would have to enumerate more multisets than allowed.
    #[error("instance too large: {multisets} dataset multisets exceed the cap of {cap}")]
    InstanceTooLarge { multisets: u128, cap: u128 },

    /// No dataset is consistent with the observed view.
    #[error("view has zero evidence under the prior")]
    ZeroEvidence,

    /// A free parameter lies outside the window in which a bound is valid.
    #[error("{what} = {value} outside admissible window [{lo}, {hi}]")]
    Validity {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The validity window of a bound is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Input lies outside the hypotheses of the closed-form calibration.
    #[error("outside the supported range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
