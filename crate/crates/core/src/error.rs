use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precision mismatch: {left} vs {right} fractional bits")]
    PrecisionMismatch { left: u32, right: u32 },

    #[error("precision exhausted: need at least {required} fractional bits, have {available}")]
    PrecisionExhausted { required: u64, available: u64 },

    #[error("radius {radius} is below the resolution of {bits}-bit fixed point")]
    DegenerateRadius { radius: String, bits: u32 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("generator rule exhausted: no map defined for n = {n}")]
    RuleExhausted { n: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("unsupported dimension {0}")]
    UnsupportedDim(usize),

    #[error("search budget exceeded: {0}")]
    SearchBudget(String),

    #[error("kernel of size {size} exceeds cap {cap}")]
    CapExceeded { size: String, cap: u64 },

    #[error("no witness found: {0}")]
    WitnessNotFound(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
