use thiserror::Error;

/// Errors raised by likelihood evaluation, fitting and inference.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A fixed or random coordinate lies outside its declared support.
    #[error("domain error: {what} = {value} is outside its support ({detail})")]
    Domain {
        what: String,
        value: f64,
        detail: String,
    },

    /// Dataset does not satisfy a structural invariant or is inconsistent with the model.
    #[error("data error: {0}")]
    Data(String),

    /// Dimension mismatch between arguments.
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: String,
        got: usize,
        expected: usize,
    },

    /// An iterative method stopped before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (gradient sup-norm {grad_norm:.3e}): {context}")]
    Convergence {
        context: String,
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    /// A positivity-constrained parameter drifted to the edge of its domain.
    #[error("boundary error: parameter {param} diverged toward the domain boundary (value {value:.3e})")]
    Boundary { param: String, value: f64 },

    /// An information matrix or Schur complement is singular.
    #[error("rank error: {context} (smallest eigenvalue {min_eigenvalue:.3e}, direction {direction:?})")]
    Rank {
        context: String,
        min_eigenvalue: f64,
        direction: Vec<f64>,
    },

    /// Second-derivative curvature is not negative definite where it must be.
    #[error("curvature error: {0}")]
    Curvature(String),

    /// Requested operation is not supported by this model or configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Caller combined arguments that do not belong together.
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>, value: f64, detail: impl Into<String>) -> Self {
        Error::Domain {
            what: what.into(),
            value,
            detail: detail.into(),
        }
    }

    pub(crate) fn dimension(what: impl Into<String>, got: usize, expected: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            got,
            expected,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
