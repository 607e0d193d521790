use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size must be odd (got {0})")]
    EvenGrid(usize),
    #[error("grid size must be at least {min} (got {got})")]
    GridTooSmall { got: usize, min: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("initial touchdown: min(u) = {0}")]
    InitialTouchdown(f64),
    #[error("incompatible initial condition: {0}")]
    IncompatibleInitial(String),
    #[error("profile does not match grid: {0}")]
    GridMismatch(String),
    #[error("elliptic domain degenerate: min(u) = {0}")]
    DegenerateDomain(f64),
    #[error("singular transformed system")]
    SingularTransformed,
    #[error("implicit step singular")]
    ImplicitStepSingular,
    #[error("dt fell below dt_min ({0})")]
    StepTooSmall(f64),
    #[error("Newton stagnation after {iterations} iterations (residual {residual:e})")]
    NewtonStagnation { iterations: usize, residual: f64 },
    #[error("iterate touched down")]
    IterateTouchedDown,
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("eigen-solver did not converge")]
    EigenFailure,
    #[error("decay fit unreliable: {0}")]
    DecayFitUnreliable(String),
    #[error("inconclusive at lambda={0}")]
    Inconclusive(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
