//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by design, estimation and simulation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Invalid input that fails a precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// A computation could not be carried out (non-convergence, degenerate data).
    #[error("computation: {0}")]
    Computation(String),

    /// The censored data contain no events, so rank statistics are undefined.
    #[error("no events observed; statistic undefined")]
    NoEvents,

    /// Only one arm is present in the data.
    #[error("only one arm present in the data")]
    OneArm,

    /// The weighted log-rank variance sum is zero.
    #[error("zero total variance in log-rank statistic")]
    ZeroVariance,

    /// The requested design has no feasible sample size (zero effect).
    #[error("no feasible design: effect size is zero ({0})")]
    InfeasibleDesign(String),

    /// The Markov recursion produced negative at-risk mass.
    #[error("at-risk recursion went negative at t={t:.3}; increase the interval count (M={m})")]
    CoarseGrid { t: f64, m: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
