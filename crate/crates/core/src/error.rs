use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field contains NaN or infinite values")]
    NonFiniteField,
    #[error("no grid node lies inside the requested region")]
    EmptyRegion,
    #[error("outside the admissible regime: {0}")]
    Regime(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("sandwich bound violated at t = {t:e} (|U_J|/|U_0| = {ratio})")]
    SandwichViolation { t: f64, ratio: f64 },
    #[error("nonlinear substep blows up within dt = {dt:e}")]
    SubstepBlowup { dt: f64 },
    #[error("step size underflow: dt = {dt:e} at t = {t:e}")]
    StepSizeUnderflow { dt: f64, t: f64 },
    #[error("Picard iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
