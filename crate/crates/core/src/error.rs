use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The Fock-space cutoff is too small for the state being represented.
    #[error("truncation inadequate: {0}")]
    Truncation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("integration failed at t = {last_good_time}: {reason}")]
    Integration { last_good_time: f64, reason: String },

    #[error("linear solve failed (residual {residual:.3e}): {reason}")]
    Solver { residual: f64, reason: String },

    /// A density matrix failed the trace/Hermiticity/positivity checks.
    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("{0}")]
    Unsupported(String),
}
