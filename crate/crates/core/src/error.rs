use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative probability {p} at entry {index:?}")]
    NegativeProbability { index: Vec<usize>, p: f64 },

    #[error("probabilities sum to {0}, expected 1")]
    MassNotOne(f64),

    #[error("duplicate entry for index {0:?}")]
    DuplicateEntry(Vec<usize>),

    #[error("entry index {index:?} out of range for the declared alphabets")]
    IndexOutOfRange { index: Vec<usize> },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid variable selection: {0}")]
    InvalidVariables(String),

    #[error("conditioning on a zero-mass symbol (variable {var}, symbol {symbol})")]
    ZeroMassConditioning { var: usize, symbol: usize },

    #[error("information quantity {0} is negative beyond rounding tolerance")]
    NegativeInformation(f64),

    #[error("channel does not match the support of the distribution: {0}")]
    SupportMismatch(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("optimizer did not reach feasibility: constraint residual {residual:e} > {tolerance:e}")]
    OptimizerDidNotConverge { residual: f64, tolerance: f64 },

    #[error("grid enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("coordinate tag mismatch: expected {expected}, found {found}")]
    TagMismatch { expected: String, found: String },

    #[error("string length {0} exceeds the size guard (4L+2 must be at most 24)")]
    SizeGuard(u32),

    #[error("target intercept {0} is not positive")]
    ZeroTargetIntercept(usize),

    #[error("the bit-OT sup oracle has not confirmed the sup term (got {0:?})")]
    OracleNotRun(Option<f64>),

    #[error("no target constraint with positive right-hand side applies to any source point")]
    NoPositiveConstraint,

    #[error("identity violated in {check}: {detail}")]
    IdentityViolation { check: String, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
