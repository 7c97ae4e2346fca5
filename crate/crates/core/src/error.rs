use thiserror::Error;

/// Errors for structurally impossible requests.  Soft failures (tolerance
/// violations) are reported through [`crate::report::ValidationReport`]
/// entries instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block size {0}: blocks must be positive")]
    InvalidBlock(usize),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("composition mismatch: {0}")]
    CompositionError(String),
    #[error("sesquilinear form is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("map is not a conditional expectation: {0}")]
    NotAnExpectation(String),
    #[error("left action is degenerate: {0}")]
    DegenerateAction(String),
    #[error("transformation target is not a constant diagram")]
    NotACone,
    #[error("representation data is not surjective on arrow {arrow}: rank {rank} < dim {dim}")]
    NotSurjective {
        arrow: String,
        rank: usize,
        dim: usize,
    },
    #[error("diagram colimit is not concretely evaluable: {0}")]
    NotEvaluable(String),
    #[error("Fell bundle is not saturated: {0}")]
    NotSaturated(String),
    #[error("numerical decomposition failed: residual {residual:.3e}")]
    DecompositionFailed { residual: f64 },
    #[error("diagram failed validation: {0}")]
    InvalidDiagram(String),
    #[error("invalid representation assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
