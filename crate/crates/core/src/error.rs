use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("grid too coarse: {needed} nodes needed, {got} available")]
    GridTooCoarse { needed: usize, got: usize },
    #[error("stereographic pole at node {0}")]
    PoleError(usize),
    #[error("field does not vanish at the origin (|f(0)| = {0:e})")]
    SingularOrigin(f64),
    #[error("adaptive quadrature exceeded its budget on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("series truncation: {0}")]
    SeriesTruncation(String),
    #[error("series evaluated outside its window: y = {0}")]
    SeriesDivergence(f64),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("matching failure: {0}")]
    MatchFailure(String),
    #[error("ill-conditioned fit (condition number {0:e})")]
    FitIllConditioned(f64),
    #[error("modulation fit diverged (lambda = {0:e})")]
    FitDiverged(f64),
    #[error("inner scale unresolved: spacing {spacing:e} exceeds {limit:e}")]
    ScaleUnresolved { spacing: f64, limit: f64 },
    #[error("grids do not match")]
    GridMismatch,
    #[error("implicit step rejected after {iterations} iterations (residual {residual:e})")]
    StepRejected { iterations: usize, residual: f64 },
    #[error("ode integration failed: {0}")]
    OdeFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
