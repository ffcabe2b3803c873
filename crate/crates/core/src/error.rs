use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 16")]
    NotPowerOfTwo(usize),
    #[error("half-length must be positive and finite, got {0}")]
    InvalidHalfLength(f64),
    #[error("expected {expected} samples, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("Lebesgue exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
    #[error("multiplier {label:?} is not conjugate-symmetric: imaginary residue {residue:e}")]
    NonRealMultiplier { label: String, residue: f64 },
    #[error("invalid Besov parameters: {0}")]
    InvalidBesovParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("undefined input: {0}")]
    UndefinedInput(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("velocity trajectory covers [0, {available}] but [0, {requested}] was requested")]
    TimeRange { available: f64, requested: f64 },
    #[error("need at least {needed} samples on [0, T0], found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("packet index {n} is not resolvable on this grid: {reason}")]
    Unresolvable { n: i32, reason: String },
    #[error("grid too coarse in frequency: {0}")]
    GridTooCoarse(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("shift {0} is not an integer multiple of the grid spacing")]
    NonGridAligned(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
