use thiserror::Error;

/// Errors produced by the learning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate partition: subspace has dimension 0")]
    DegeneratePartition,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no samples fall inside the partition")]
    EmptyPartition,

    #[error("normal equations are rank deficient ({features} features); retry with a positive ridge")]
    RankDeficient { features: usize },

    #[error("polynomial has no non-constant terms")]
    DegeneratePolynomial,

    #[error("box has Gaussian mass {0:e}, too small to condition on")]
    DegenerateBox(f64),

    #[error("instance too large for exhaustive search: {cubes} nonempty cubes (limit {limit})")]
    TooManyCubes { cubes: usize, limit: usize },

    #[error("unsupported label count {0}: construction needs K >= 8 and K divisible by 4")]
    UnsupportedLabelCount(usize),

    #[error("near-orthogonal family infeasible: found {achieved} of {requested} matrices")]
    Infeasible { achieved: usize, requested: usize },

    #[error("data source exhausted: requested {requested} samples, {available} left")]
    SourceExhausted { requested: usize, available: usize },

    #[error("basis dimension {dim} exceeds cap {cap}")]
    BasisCapExceeded {
        dim: usize,
        cap: usize,
        trace: Box<crate::learner::TrainTrace>,
    },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
