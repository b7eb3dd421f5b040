use thiserror::Error;

/// Errors raised by validation and numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mu_min must be positive, got {0}")]
    NonPositiveMuMin(f64),

    #[error("momentum bounds inverted: mu_min = {mu_min} > mu_max = {mu_max}")]
    InvertedMomentumBounds { mu_min: f64, mu_max: f64 },

    #[error("eps_max must be non-negative, got {0}")]
    NegativeEpsMax(f64),

    #[error("beta_0 must be a non-zero finite number, got {0}")]
    InvalidBeta(f64),

    #[error("initial investment must be positive, got {0}")]
    NonPositiveInvestment(f64),

    #[error("feedback parameter K must be positive, got {0}")]
    NonPositiveFeedback(f64),

    #[error("horizon must have at least 2 periods, got {0}")]
    HorizonTooShort(u32),

    #[error("market realization (mu_1 = {mu_1}, eps = {eps}) is not admissible: {reason}")]
    NotAdmissible { mu_1: f64, eps: f64, reason: &'static str },

    #[error("no real {n}-th root of negative value {x}")]
    RootDomain { x: f64, n: u32 },

    #[error("theta = {theta} is at the singular point 2^(1/{n}) - 1")]
    Singularity { theta: f64, n: u32 },

    #[error("theta must be positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("numeric overflow while evaluating {0}")]
    Overflow(&'static str),

    #[error("invalid scan: k_max_scan = {k_max}, step = {step} (need k_max_scan > step > 0)")]
    InvalidScan { k_max: f64, step: f64 },

    #[error("invalid grid resolution: {0}")]
    InvalidGrid(&'static str),

    #[error("invalid price process: {0}")]
    InvalidGbm(&'static str),

    #[error("leverage multiple must be >= 1, got {0}")]
    InvalidLeverage(f64),

    #[error("initial account value must be positive, got {0}")]
    NonPositiveAccountValue(f64),

    #[error("ensemble needs at least one path")]
    NoPaths,

    #[error("cannot build a histogram from an empty sample")]
    EmptySample,

    #[error("invalid histogram bins: {0}")]
    InvalidBins(&'static str),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveMuMin(_) => "non_positive_mu_min",
            Error::InvertedMomentumBounds { .. } => "inverted_momentum_bounds",
            Error::NegativeEpsMax(_) => "negative_eps_max",
            Error::InvalidBeta(_) => "invalid_beta",
            Error::NonPositiveInvestment(_) => "non_positive_investment",
            Error::NonPositiveFeedback(_) => "non_positive_feedback",
            Error::HorizonTooShort(_) => "horizon_too_short",
            Error::NotAdmissible { .. } => "not_admissible",
            Error::RootDomain { .. } => "root_domain",
            Error::Singularity { .. } => "singularity",
            Error::NonPositiveTheta(_) => "non_positive_theta",
            Error::Overflow(_) => "overflow",
            Error::InvalidScan { .. } => "invalid_scan",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidGbm(_) => "invalid_gbm",
            Error::InvalidLeverage(_) => "invalid_leverage",
            Error::NonPositiveAccountValue(_) => "non_positive_account_value",
            Error::NoPaths => "no_paths",
            Error::EmptySample => "empty_sample",
            Error::InvalidBins(_) => "invalid_bins",
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self, Error::Overflow(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
