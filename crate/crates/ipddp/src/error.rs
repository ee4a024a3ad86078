//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by problem evaluation, the solver passes, and artifact I/O.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar so
/// the error type stays non-generic.
#[derive(Debug, Error)]
pub enum Error {
    /// Dynamics produced a non-finite state while simulating forward.
    #[error("dynamics produced a non-finite state at stage {stage}")]
    RolloutDiverged { stage: usize },

    /// A derivative evaluation returned NaN or infinity.
    #[error("non-finite derivative of {function} at stage {stage}")]
    NonFiniteDerivative { function: &'static str, stage: usize },

    /// A slack entry was zero or negative where strict positivity is required.
    #[error("nonpositive slack entry at stage {stage}")]
    NonpositiveSlack { stage: usize },

    /// A backward-pass quantity became non-finite.
    #[error("non-finite value expansion at stage {stage}")]
    NonFiniteValue { stage: usize },

    /// The local regularization ladder ran out without reaching positive
    /// definiteness.
    #[error("regularization failed at stage {stage}: mu2 reached {mu2:e} without positive definiteness")]
    RegularizationFailed { stage: usize, mu2: f64 },

    /// Control-gain factorization failed even though the eigenvalue test
    /// passed; the caller retries with more regularization.
    #[error("control-block factorization failed at stage {stage}")]
    FactorizationFailed { stage: usize },

    /// The backtracking line search exhausted its trial budget.
    #[error("line search failed after {trials} trials (best: alpha={best_alpha:e}, phi={best_phi:e}, theta={best_theta:e})")]
    LineSearchFailed {
        trials: usize,
        best_alpha: f64,
        best_phi: f64,
        best_theta: f64,
    },

    /// Inputs disagree on a dimension.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A solver-configuration field is outside its valid range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Filesystem failure while writing or reading artifacts.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A serialized trajectory or config file did not parse.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
