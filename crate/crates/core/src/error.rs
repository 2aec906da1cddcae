use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("truncation overflow in {what}: tail mass {tail:e} at dimension {dim} (cap {cap})")]
    TruncationOverflow {
        what: &'static str,
        dim: usize,
        cap: usize,
        tail: f64,
    },

    #[error("state side {side} exceeds capacity {cap}")]
    Capacity { side: usize, cap: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid mode index {index} for a {modes}-mode state")]
    InvalidMode { index: usize, modes: usize },

    #[error("degenerate variance {variance:e}")]
    DegenerateVariance { variance: f64 },

    #[error("indeterminate ratio: both signal-to-noise ratios vanish")]
    IndeterminateRatio,

    #[error("zero signal: {0}")]
    ZeroSignal(&'static str),

    #[error("outside the asymptotic regime: {0}")]
    OutOfRegime(String),

    #[error("no boundary: {0}")]
    NoBoundary(String),

    #[error("sweep of {points} points exceeds the cap of {cap}")]
    SweepTooLarge { points: usize, cap: usize },

    #[error("empty sweep: at least one axis with one value is required")]
    EmptySweep,
}
