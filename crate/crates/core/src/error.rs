use thiserror::Error;

use crate::flow::FlowState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} samples, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("gauge matrix is not orthogonal (|RᵀR − I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("matrix power must be >= 1, got {0}")]
    InvalidPower(u32),

    #[error("c must be <= 0 (non-positive sectional curvature), got {0}")]
    PositiveCurvature(f64),

    #[error("non-finite values produced by {0}")]
    NonFinite(&'static str),

    #[error("blow-up suspected at t = {t}: step size {dt:e} fell below dt_min")]
    BlowUp { t: f64, dt: f64, last_good: Box<FlowState> },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("degenerate direction: perturbation field is identically zero")]
    DegenerateDirection,

    #[error("eta must be > 0, got {0}")]
    InvalidEta(f64),

    #[error("overflow while exponentiating the weight function")]
    WeightOverflow,

    #[error("entropy weight is not normalized (∫u = {0})")]
    Unnormalized(f64),

    #[error("entropy horizon reached: t + dt = {reached} >= T = {horizon}")]
    EntropyHorizon { reached: f64, horizon: f64 },

    #[error("zero perturbation")]
    ZeroPerturbation,

    #[error("decay fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("decay fit needs strictly positive samples (index {0})")]
    NonPositiveSample(usize),

    #[error("CFL violation: dt = {dt:e} exceeds {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
