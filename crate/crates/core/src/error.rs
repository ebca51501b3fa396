use thiserror::Error;

/// Errors raised by the simulator and the closed-form analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix lost positive definiteness at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("selection space holds {count} subsets, above the enumeration cap of {cap}")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("feedback pattern inconsistent with decoding set: {0}")]
    Consistency(String),

    #[error("malformed feedback pattern: {0}")]
    MalformedPattern(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("search does not bracket the target: {0}")]
    NonBracketing(String),

    #[error("monotonicity assumption violated: {0}")]
    Monotonicity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
