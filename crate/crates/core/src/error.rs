//! Crate-wide error type.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::trace::TraceRecord;

/// Convenience alias for fallible crate operations.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by construction, estimation, and solver routines.
#[derive(Debug, Clone)]
pub enum Error {
    /// A parameter violated its documented domain; the message names it.
    InvalidArgument(String),
    /// Two objects had incompatible dimensions; the message names them.
    ShapeMismatch(String),
    /// A matrix entry was NaN or infinite at the given position.
    NonFinite {
        /// Row of the offending entry.
        row: usize,
        /// Column of the offending entry.
        col: usize,
    },
    /// The matrix is (numerically) rank deficient: the smallest singular
    /// value fell below `1e-10` times the largest.
    RankDeficient {
        /// Converged estimate of the smallest singular value.
        smallest: f64,
        /// Converged estimate of the largest singular value.
        largest: f64,
    },
    /// An iterative estimator failed to meet its tolerance within its cap.
    NoConvergence {
        /// Iterations spent before giving up.
        iterations: usize,
    },
    /// The operation needs a cached reference solution that is absent.
    MissingReference,
    /// An iterate became non-finite; carries the trace recorded so far.
    Diverged {
        /// Iteration at which the divergence was detected.
        iteration: usize,
        /// Checkpoints recorded before the divergence.
        trace: Vec<TraceRecord>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite { row, col } => {
                write!(f, "non-finite entry at row {row}, column {col}")
            }
            Error::RankDeficient { smallest, largest } => write!(
                f,
                "rank deficient: smallest singular value {smallest:e} below \
                 1e-10 of largest {largest:e}"
            ),
            Error::NoConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::MissingReference => {
                write!(f, "reference solution required but not cached")
            }
            Error::Diverged { iteration, .. } => {
                write!(f, "iterate diverged at iteration {iteration}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
