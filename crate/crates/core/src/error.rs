use thiserror::Error;

/// Errors raised anywhere in the aggregation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("row {row} sums to 1 {deviation:+e}")]
    RowSumViolation { row: usize, deviation: f64 },

    #[error("negative or non-finite entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("chain is reducible")]
    Reducible,

    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },

    #[error("stationary solve did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("perturbed entry ({row}, {col}) = {value:e} is negative; epsilon too large")]
    NegativeEntryAfterPerturbation { row: usize, col: usize, value: f64 },

    #[error("limit distribution has zero mass at state {index}")]
    DegenerateGamma { index: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("group {group} has no mass")]
    EmptyGroup { group: usize },

    #[error("group {group} collapsed to zero mass during an update")]
    EmptyGroupCollapse { group: usize },

    #[error("absolute continuity violated at component {index} (row {row:?}, group {group:?})")]
    AbsoluteContinuityViolation {
        index: usize,
        row: Option<usize>,
        group: Option<usize>,
    },

    #[error("free energy increased by {delta:e} at iteration {iter}")]
    MonotonicityViolation { iter: usize, delta: f64 },

    #[error("runs are not comparable: {0}")]
    IncompatibleRuns(String),

    #[error("weight matrix entry ({group}, {column}) is numerically singular")]
    SingularTheta { group: usize, column: usize },

    #[error("no critical point in bracket [{lo}, {hi}]")]
    NoCriticalPointInBracket { lo: f64, hi: f64 },

    #[error("corrected beta fixed point did not settle; last bracket [{lo}, {hi}]")]
    FixedPointDivergence { lo: f64, hi: f64 },

    #[error("{count} candidates exceed the enumeration cap of {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable identifier, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::RowSumViolation { .. } => "RowSumViolation",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::Reducible => "Reducible",
            Error::Periodic { .. } => "Periodic",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NegativeEntryAfterPerturbation { .. } => "NegativeEntryAfterPerturbation",
            Error::DegenerateGamma { .. } => "DegenerateGamma",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyGroup { .. } => "EmptyGroup",
            Error::EmptyGroupCollapse { .. } => "EmptyGroupCollapse",
            Error::AbsoluteContinuityViolation { .. } => "AbsoluteContinuityViolation",
            Error::MonotonicityViolation { .. } => "MonotonicityViolation",
            Error::IncompatibleRuns(_) => "IncompatibleRuns",
            Error::SingularTheta { .. } => "SingularTheta",
            Error::NoCriticalPointInBracket { .. } => "NoCriticalPointInBracket",
            Error::FixedPointDivergence { .. } => "FixedPointDivergence",
            Error::TooLarge { .. } => "TooLarge",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    /// Process exit code: 2 validation, 3 numeric, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::EmptyGroupCollapse { .. }
            | Error::AbsoluteContinuityViolation { .. }
            | Error::MonotonicityViolation { .. }
            | Error::SingularTheta { .. }
            | Error::FixedPointDivergence { .. }
            | Error::EmptyGroup { .. } => 3,
            Error::TooLarge { .. } | Error::NoCriticalPointInBracket { .. } => 4,
            _ => 2,
        }
    }
}
