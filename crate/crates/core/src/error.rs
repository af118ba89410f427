use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a documented invariant. `field` names the
    /// offending input.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state of dimension {dim} exceeds the memory budget of {budget} elements")]
    MemoryBudget { dim: usize, budget: usize },

    /// The Fock cutoff clips too much of a distribution.
    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("drive at {drive:e} rad/s is within the guard band of mode frequency {mode:e} rad/s")]
    ResonantDrive { drive: f64, mode: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    /// Red sideband at least as strong as blue: not a thermal readout.
    #[error("sideband ratio not thermal: P_red = {red}, P_blue = {blue}")]
    NonThermalRatio { red: f64, blue: f64 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }
}
