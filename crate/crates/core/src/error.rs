use thiserror::Error;

use crate::eigensolver::EigenPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("function space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("arity error: {0}")]
    Arity(String),

    #[error("unbound symbol `{0}` during assembly")]
    UnboundSymbol(String),

    #[error("unsupported expression: {0}")]
    UnsupportedExpression(String),

    #[error("invalid boundary condition: {0}")]
    InvalidBc(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("Newton solver did not converge after {iterations} iterations (|F| = {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("tape is sealed; no further records may be added")]
    TapeSealed,

    #[error("tape is not sealed")]
    TapeNotSealed,

    #[error("invalid tape: {0}")]
    InvalidTape(String),

    #[error("unsupported functional: {0}")]
    UnsupportedFunctional(String),

    #[error("inner-product matrix is not symmetric positive-definite: {0}")]
    InvalidInnerProduct(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("Lanczos breakdown with {converged} of {requested} eigenpairs converged")]
    Breakdown { converged: usize, requested: usize },

    #[error("Lanczos did not converge within {restarts} restarts")]
    EigenNonConvergence {
        restarts: usize,
        best: Box<Vec<EigenPair>>,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("oracle mismatch at probe {probe}: error {error:.3e} exceeds {tolerance:.1e} ({what})")]
    OracleMismatch {
        probe: usize,
        error: f64,
        tolerance: f64,
        what: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
