use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite matrix")]
    NonFiniteMatrix,

    /// A finite-difference stencil point evaluated to a non-finite value.
    #[error("stencil crosses wall")]
    StencilCrossesWall,

    #[error("outside series budget: |z| = {0} > 16")]
    OutsideSeriesBudget(f64),

    #[error("unknown builtin objective `{0}`")]
    UnknownBuiltin(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no shift in the delta sequence makes the Hessian invertible")]
    SingularShift,

    #[error("avoidance set has no distance function")]
    NoDistance,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no feasible start after {0} draws")]
    NoFeasibleStart(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
