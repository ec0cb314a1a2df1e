use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("state is not normalized (norm² = {norm_sq:.3e})")]
    NotNormalized { norm_sq: f64 },

    #[error("norm drift {drift:.3e} at step {step} for packet {packet}")]
    NormDrift { packet: usize, step: usize, drift: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dense oracle limited to N <= {max}, got N = {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("integration accuracy: {0}")]
    Accuracy(String),

    #[error("Lyapunov estimate did not converge: relative spread {spread:.3} among initial points")]
    NonConvergence { spread: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("Fock tail mass {tail:.3e} beyond n_max = {n_max}")]
    TailOverflow { tail: f64, n_max: usize },

    #[error("ill-conditioned Glauber inversion: round-trip residual {residual:.3e}")]
    IllConditioned { residual: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
