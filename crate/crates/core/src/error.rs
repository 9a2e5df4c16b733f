use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside table range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("target gain {target_db:.2} dB unreachable (best achieved {best_db:.2} dB)")]
    GainUnreachable { target_db: f64, best_db: f64 },

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("no bifurcation: {0}")]
    NoBifurcation(String),

    #[error("expected at least {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
