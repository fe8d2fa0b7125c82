use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("non-finite value {value} at position {index}")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("pooled sample contains tied value {value}; use the midrank policy to allow ties")]
    TiesPresent { value: f64 },

    #[error("statistic requires balanced samples, got m={m} and n={n}")]
    UnbalancedSamples { m: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{combinations} combinations exceed the enumeration cap of {cap}")]
    EnumerationTooLarge { combinations: u128, cap: u64 },

    #[error("cdf is not monotone non-decreasing on the working interval")]
    NonMonotoneCdf,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("malformed cache file: {0}")]
    MalformedCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
