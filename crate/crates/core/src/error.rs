use thiserror::Error;

/// Errors produced anywhere in the coreset toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("weight at index {index} is not strictly positive ({weight})")]
    NonPositiveWeight { index: usize, weight: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid harmonic range: need m >= i >= 2, got i={i}, m={m}")]
    InvalidRange { i: u64, m: u64 },

    #[error("argument {value} outside the domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("point {index} leaves the grid [-{bound}, {bound}]^d")]
    GridBoundExceeded { index: usize, bound: i64 },

    #[error("projective construction exceeded its budget of {budget} node expansions")]
    RecursionBudgetExceeded { budget: usize },

    #[error("l-infinity scheme failed: {0}")]
    SchemeFailure(String),

    #[error("sensitivities sum to zero")]
    ZeroTotalSensitivity,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("mixture component {component} collapsed after reseeding")]
    DegenerateComponent { component: usize },

    #[error("stream has not received any points")]
    EmptyStream,

    #[error("halving function check failed at tree {h}: s(h)={value:.3e} < required {required:.3e}")]
    HalvingCheck { h: usize, value: f64, required: f64 },

    #[error("inner coreset failed at tree {tree}, level {level}: {source}")]
    InnerScheme {
        tree: usize,
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
