use thiserror::Error;

/// Errors produced by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate mode: {0}")]
    DegenerateMode(String),

    /// The biorthogonal eigenbasis is ill-conditioned this close to an
    /// exceptional point.
    #[error("exceptional point: |distance| = {distance:e} below tolerance {tolerance:e}")]
    EpDegenerate { distance: f64, tolerance: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("coefficient order {order} exceeds the big-integer budget ({bits} > {budget} bits)")]
    OrderOverflow { order: usize, bits: u64, budget: u64 },

    #[error("Δτ = {rate} is below the series convergence radius {radius}")]
    RadiusExceeded { rate: f64, radius: f64 },

    #[error("x = {x} is within {guard:e} of the singular point {singular}")]
    SingularPoint { x: f64, singular: f64, guard: f64 },

    #[error("grid too coarse: differentiation error estimate {estimate:e} exceeds {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds {tolerance:e}")]
    QuadratureNonConvergent { estimate: f64, tolerance: f64 },

    #[error("defect changes sign inside the fit window")]
    SignChange,

    #[error("fit needs {needed} points spanning {span} decade(s), got {got}")]
    InsufficientData { needed: usize, span: f64, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
