use thiserror::Error;

/// Failures of the atomic model (steady state, susceptibility, absorption).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("stationary master equation is singular (condition estimate {condition:.3e})")]
    SingularSteadyState { condition: f64 },
    #[error("stationary residual {0:.3e} exceeds tolerance")]
    Residual(f64),
    #[error("mode {0} is undriven; its susceptibility is undefined")]
    ZeroDrive(usize),
    #[error("1 + 4*pi*chi vanishes (square-root branch point)")]
    BranchPoint,
    #[error("two-level approximation evaluated at its pole")]
    DegenerateDenominator,
}

/// Failures of the feedback solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no seed converged ({failed_seeds} seeds failed, {model_errors} model errors)")]
    NoSolution {
        failed_seeds: usize,
        model_errors: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("maps were computed on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("forward and backward traces do not share abscissae")]
    AbscissaMismatch,
}
