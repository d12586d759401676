use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("space mismatch")]
    SpaceMismatch,

    #[error("index {index} out of bounds for {len} variables")]
    VariableOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid variable space: {0}")]
    InvalidSpace(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("metric incompatible with space: {0}")]
    IncompatibleMetric(String),

    #[error("use gradient fields directly")]
    GradientFlowNotLiftable,

    #[error("surrogate undefined; solve directly in t")]
    SurrogateUndefined,

    #[error("invalid flow: {0}")]
    InvalidFlow(String),

    #[error("empty field list")]
    EmptyFields,

    #[error("degenerate witness: no generic point found in {attempts} resamples")]
    DegenerateWitness { attempts: usize },

    #[error("law failed exact re-verification against field {field}")]
    UnsoundLaw { field: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not covered by the closed-form momentum count; use computed Lie dimension")]
    FormulaNotCovered,

    #[error("Lie algebra exceeded the basis budget of {budget} fields at iteration {iteration}")]
    LieBudget { budget: usize, iteration: usize },

    #[error("law requires momentum run")]
    LawRequiresMomentum,

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("mirror positivity violated at step {step} (coordinate {coord})")]
    PositivityViolation { step: usize, coord: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
