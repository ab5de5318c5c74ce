//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violates its documented range or consistency rule.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation was evaluated outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The steady-state linear system could not be solved reliably.
    #[error("solver error: {reason} (condition estimate {condition:.3e})")]
    Solver { reason: String, condition: f64 },

    /// Adaptive integration collapsed below the minimum step size.
    #[error(
        "stiffness error: step size underflow at t = {t:.6e} s (dt = {dt:.3e} s); \
         loosen the tolerance or refine the output grid"
    )]
    Stiffness { t: f64, dt: f64 },

    /// A time grid is unusable for the requested operation.
    #[error("grid error: {0}")]
    Grid(String),

    /// A sampled curve does not have the shape the analysis requires.
    #[error("shape error: {0}")]
    Shape(String),

    /// Requested accuracy cannot be reached with the given discretisation.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Sampling-rate requirement of the detection chain is violated.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Demodulation bins do not contain enough beat periods.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Input trace carries no usable signal.
    #[error("flat-trace error: {0}")]
    FlatTrace(String),

    /// A fit did not converge or cannot be used downstream.
    #[error("fit error: {0}")]
    Fit(String),

    /// Operation called outside its stated validity regime.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
