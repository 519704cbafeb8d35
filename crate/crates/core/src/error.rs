use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsiError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate scaling: norm of the initial interface iterate is zero")]
    DegenerateScaling,

    #[error("coupling iteration did not converge in {iterations} iterations (last residual norm {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("{solver} failed: {reason}")]
    SubsolverFailure { solver: String, reason: String },

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("step size {dt:.3e} fell below the minimum {dt_min:.3e} at t = {t:.6}")]
    StepTooSmall { t: f64, dt: f64, dt_min: f64 },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FsiError {
    fn from(e: std::io::Error) -> Self {
        FsiError::Io(e.to_string())
    }
}

impl From<csv::Error> for FsiError {
    fn from(e: csv::Error) -> Self {
        FsiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FsiError>;
