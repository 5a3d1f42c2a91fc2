use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected blocks {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("element is not self-adjoint (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("embedding violates unitality at A-block {block}: sum of multiplicities times B-dims is {got}, block dimension is {expected}")]
    Unitality { block: usize, expected: usize, got: usize },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("not a minimal projection of the subalgebra: {0}")]
    NotMinimalProjection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conditional expectation failed validation: {axiom} (residual {residual:.3e})")]
    Validation { axiom: String, residual: f64 },

    #[error("quasi-basis reconstruction residual {residual:.3e} exceeds tolerance")]
    Reconstruction { residual: f64 },

    #[error("index element invariant failed: {0}")]
    IndexInvariant(String),

    #[error("dilation residual {residual:.3e} exceeds tolerance")]
    Dilation { residual: f64 },

    #[error("expectation has infinite index")]
    InfiniteIndex,

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
