use thiserror::Error;

use crate::steering::SolverTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model component failed a pointwise or structural check.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch for {what}: expected {expected:?}, found {found:?}")]
    Dimension {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{matrix} needs derivatives up to order {required}, only {available} available")]
    DerivativeOrder {
        matrix: String,
        required: usize,
        available: usize,
    },

    #[error("integration failed at t = {t} (step {step:e}): {reason}")]
    Integration { t: f64, step: f64, reason: String },

    /// The Riccati flow from the anchor leaves every bounded set at `escape`.
    #[error("Riccati solution anchored at s = {anchor} escapes in finite time at t = {escape}")]
    FiniteEscape { anchor: f64, escape: f64 },

    #[error("point outside the feasible domain: {0}")]
    Infeasible(String),

    #[error("noise kernel C D C^T differs from B R^-1 B^T at t = {t} (deviation {deviation:e})")]
    KernelMismatch { t: f64, deviation: f64 },

    #[error(
        "terminal variance {sigma1} is unreachable from a deterministic initial state; \
         reachable variances lie in (0, {eta})"
    )]
    UnreachableFromDeterministicStart { sigma1: f64, eta: f64 },

    #[error("not supported: {0}")]
    OutOfScope(String),

    #[error("solver did not converge: {reason}")]
    SolverDiverged {
        reason: String,
        trace: Box<SolverTrace>,
    },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }
}
