use thiserror::Error;

/// Errors raised by the experiment library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("index {index} is beyond the sequence horizon {horizon}")]
    Horizon { index: usize, horizon: usize },
    #[error("operation requires a sequence with bounded ratios")]
    RequiresBoundedRatios,
    #[error("coprimality to every sequence element is undecidable for this sequence")]
    CoprimalityUndecidable,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid approximating function: {0}")]
    InvalidFunction(String),
    #[error("empty set regime: tau = {tau} >= 1/i = {bound}, the set W_D(i, j, psi) is empty")]
    EmptySetRegime { tau: String, bound: String },
    #[error("condensation inapplicable: {0}")]
    CondensationInapplicable(String),
    #[error("enumeration cap exceeded: {what} = {value} > {cap}")]
    CapExceeded { what: &'static str, value: String, cap: String },
    #[error("psi(n_ck) = {0} is not below 1")]
    Amplitude(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("precision insufficient: {0}")]
    Precision(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSequence(_) => "invalid_sequence",
            Error::Horizon { .. } => "horizon",
            Error::RequiresBoundedRatios => "requires_bounded_ratios",
            Error::CoprimalityUndecidable => "coprimality_undecidable",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::InvalidFunction(_) => "invalid_function",
            Error::EmptySetRegime { .. } => "empty_set_regime",
            Error::CondensationInapplicable(_) => "condensation_inapplicable",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Amplitude(_) => "amplitude",
            Error::Undefined(_) => "undefined",
            Error::Precondition(_) => "precondition",
            Error::Precision(_) => "precision",
            Error::ResourceLimit(_) => "resource_limit",
            Error::Invariant(_) => "invariant",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
