use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("singular path loss: distance must be positive, got {0}")]
    ZeroDistance(f64),

    #[error("SINR denominator (interference + noise) is zero")]
    ZeroDenominator,

    #[error("negative SINR {0}")]
    NegativeSinr(f64),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error(
        "quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error_estimate}, panels {panels}"
    )]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error_estimate: f64,
        panels: usize,
    },

    #[error("candidate index {index} out of range for a neighborhood of {len}")]
    CandidateOutOfRange { index: usize, len: usize },

    #[error("q-table was built for `{table}` but the metric was requested for `{requested}`")]
    FingerprintMismatch { table: String, requested: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
