//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, field and truncation operations.
#[derive(Debug, Error)]
pub enum MzError {
    #[error("invalid convex body: {0}")]
    InvalidBody(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {what} (residual {residual:.3e})")]
    NumericFailure { what: String, residual: f64 },

    #[error("field format error: {0}")]
    Format(String),

    #[error("component mismatch: expected {expected}, got {got}")]
    ComponentMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate mollification radius {r:.3e} below grid spacing {h:.3e}")]
    DegenerateRadius { r: f64, h: f64 },

    #[error("ball (center {center:?}, radius {radius}) exits the grid domain")]
    BallExitsDomain { center: Vec<f64>, radius: f64 },

    #[error("theta = {theta:.3e} not below the admissible bound {bound:.3e}")]
    ThetaTooLarge { theta: f64, bound: f64 },

    #[error("mean-distance precondition violated: theta = {theta:.3e} < measured mean {mean:.3e}")]
    MeanPrecondition { theta: f64, mean: f64 },

    #[error("gamma = {gamma:.3e} outside the admissible range (0, {upper:.3e})")]
    GammaOutOfRange { gamma: f64, upper: f64 },

    #[error("schedule infeasible: {0}")]
    ScheduleInfeasible(String),

    #[error("sweep iteration diverged: {0}")]
    Divergence(String),

    #[error("box nesting violated: {0}")]
    NestingViolated(String),

    #[error("constraint family violates the lower bound eta: {0}")]
    EtaViolated(String),

    #[error("continuity modulus table insufficient: {0}")]
    ModulusInsufficient(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown synthetic family: {0}")]
    UnknownFamily(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MzError {
    /// Process exit code for the CLI: 2 = configuration/schema, 3 = numeric
    /// divergence, 4 = invariant violation at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            MzError::Config(_) | MzError::Json(_) | MzError::Io(_) | MzError::Format(_) => 2,
            MzError::Divergence(_) | MzError::NumericFailure { .. } => 3,
            _ => 4,
        }
    }
}
