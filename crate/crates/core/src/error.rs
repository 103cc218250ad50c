use std::fmt;

use thiserror::Error;

/// A probability interval held in log-space, used in error payloads.
///
/// Either end may be far below the smallest positive `f64`, so both are
/// stored as natural logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogInterval {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl fmt::Display for LogInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[e^{:.6}, e^{:.6}]", self.ln_lower, self.ln_upper)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("outlier fraction {0} outside [0, 1/2]")]
    EpsilonOutOfRange(f64),

    #[error("mapping violates 2ε < α(ε) < 1 at ε = {epsilon} (α = {alpha})")]
    InvalidMapping { epsilon: f64, alpha: f64 },

    #[error("outlier fraction {0} reaches the breakdown point 1/2")]
    BreakdownExceeded(f64),

    #[error("joint outlier fraction ε̃ = {0} reaches 1/2")]
    JointBreakdownExceeded(f64),

    #[error("summed outlier fraction ε_X + ε_Y = {0} reaches 1/2")]
    SumBreakdownExceeded(f64),

    #[error("confidence level δ = e^{ln_delta:.6} outside admissible range {range}")]
    DeltaOutOfRange { ln_delta: f64, range: LogInterval },

    #[error("admissible δ-range is empty: {0}")]
    DegenerateRange(LogInterval),

    #[error("invalid probability {0}: must lie in (0, 1)")]
    InvalidProbability(f64),

    #[error("block count {k} invalid for sample size {n}")]
    InvalidBlockCount { k: usize, n: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("partition built for {expected} indices, sample has {actual}")]
    PartitionMismatch { expected: usize, actual: usize },

    #[error("sample of size {size} too small for kernel degree {degree}")]
    SampleTooSmall { size: usize, degree: usize },

    #[error("block size {block_size} smaller than required {required}")]
    BlockTooSmall { block_size: usize, required: usize },

    #[error("kernel degree {0} unsupported (exact enumeration handles d <= 3)")]
    DegreeUnsupported(usize),

    #[error("non-finite kernel value")]
    NonFiniteKernel,

    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("mask length {mask} does not match {values} values")]
    MaskMismatch { mask: usize, values: usize },

    #[error("Δ(ε) is undefined at ε = 0; use the uncontaminated expectation bound")]
    EpsilonZero,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset needs at least 2 rows, got {0}")]
    DatasetTooSmall(usize),

    #[error("non-finite gradient at epoch {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite matrix input")]
    NonFiniteInput,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Config and input-format problems, as opposed to numeric failures.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_config_error(),
            e => matches!(
                e,
                Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_)
            ),
        }
    }

    /// The innermost error, looking through [`Error::Context`] layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
