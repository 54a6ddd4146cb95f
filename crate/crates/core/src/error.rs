use thiserror::Error;

/// Errors raised by the geometry, measure and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GipError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported grid: dimension {dim} with scheme {scheme}")]
    UnsupportedGrid { dim: usize, scheme: String },

    #[error("directions are contained in a closed hemisphere")]
    HemisphereContained,

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("total masses differ: mu = {mu}, lambda = {lambda} (normalize lambda first)")]
    MassMismatch { mu: f64, lambda: f64 },

    #[error("subset enumeration over {atoms} atoms exceeds the exhaustive cap of {cap}; use heuristic mode")]
    SubsetExplosion { atoms: usize, cap: usize },

    #[error("polytope is not canonical")]
    NotCanonical,

    #[error("budget exceeded: {0}")]
    Budget(String),
}

impl GipError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, GipError>;
