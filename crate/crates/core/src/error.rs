use crate::grid::Grid;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(Grid, Grid),

    /// A parameter outside its declared range. Displays as `<name>: <reason>`.
    #[error("{name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no linking witness: {0}")]
    Linking(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
