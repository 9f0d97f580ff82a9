use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI's categorized exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phase-field value {0} outside [0, 1]")]
    PhaseFieldOutOfRange(f64),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate element {index}: area {area:.3e} mm^2 below 1e-14")]
    DegenerateElement { index: usize, area: f64 },

    #[error("local phase-field solve failed: {0}")]
    LocalSolve(String),

    #[error("local solvability lost (dR/dphi = {0:.6e} <= 0)")]
    LocalJacobian(f64),

    #[error("linear solver: {0}")]
    LinearSolver(String),

    #[error("step {step} failed to converge after {iters} iterations (residual ratio {ratio:.3e})")]
    StepFailed { step: usize, iters: usize, ratio: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
