use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("(alpha={alpha}, beta={beta}) is outside the admissible stability set")]
    Inadmissible { alpha: f64, beta: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("survival function unavailable: {0}")]
    SurvivalUnavailable(&'static str),

    #[error("scaling sequence is degenerate for n={n}: {reason}")]
    DegenerateScale { n: u64, reason: &'static str },

    #[error("index {index} out of range (length {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("acceptance bound cannot be established at state x={state}")]
    AcceptanceBound { state: f64 },

    #[error("acceptance rate {rate:.3e} fell below the floor {floor:.3e} after {proposals} proposals")]
    AcceptanceTooLow { rate: f64, floor: f64, proposals: u64 },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("unstable denominator: mean is only {z:.2} standard errors from zero")]
    UnstableDenominator { z: f64 },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("excursion is incomplete (step cap reached)")]
    IncompleteExcursion,

    #[error("path identity violated: {0}")]
    IdentityViolated(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
