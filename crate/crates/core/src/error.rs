//! Error type shared by all modules of the crate.

use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors reported by sensing operations.
///
/// Variants carry enough context to tell a caller what to change:
/// dimension mismatches are programming errors, while
/// [`Error::DegenerateSpectrum`] and [`Error::Divergence`] signal that the
/// problem instance (sample count, step size) needs adjustment.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or operator dimensions do not agree.
    DimensionMismatch { expected: usize, got: usize, what: &'static str },
    /// An observation vector has the wrong length for the ensemble.
    LengthMismatch { expected: usize, got: usize },
    /// A parameter violates its documented precondition.
    InvalidParameter(String),
    /// Materializing the ensemble would exceed the configured memory budget.
    MemoryBudget { required_bytes: u64, budget_bytes: u64 },
    /// The data matrix has (numerically) fewer than `rank` nonzero
    /// eigenvalues, so a rank-`rank` initialization cannot be formed.
    /// Usually means the sample count is far too small.
    DegenerateSpectrum { rank: usize },
    /// The iteration blew up; the step size is too large.
    Divergence { iter: usize, loss: f64 },
    /// The initialization factor is numerically rank deficient.
    RankDeficient { what: &'static str },
    /// A basis argument does not have orthonormal columns.
    NotOrthonormal { defect: f64 },
    /// The input vector is not unit norm.
    NotUnitNorm { norm: f64 },
    /// The eigenvalue gap required by a perturbation bound is zero.
    ZeroEigenGap,
    /// The requested parameters fall outside the supported regime of the
    /// operation (for example net construction above the dimension cap).
    RegimeViolation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got, what } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, got {got}")
            }
            Error::LengthMismatch { expected, got } => {
                write!(f, "observation length {got} does not match ensemble size {expected}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::MemoryBudget { required_bytes, budget_bytes } => write!(
                f,
                "materialized ensemble needs {required_bytes} bytes, budget is {budget_bytes}; \
                 use streamed mode"
            ),
            Error::DegenerateSpectrum { rank } => write!(
                f,
                "data matrix is numerically degenerate at rank {rank}; \
                 the number of measurements is likely far too small"
            ),
            Error::Divergence { iter, loss } => {
                write!(f, "iteration diverged at step {iter} (loss {loss:.3e}); reduce the step size")
            }
            Error::RankDeficient { what } => write!(f, "{what} is numerically rank deficient"),
            Error::NotOrthonormal { defect } => {
                write!(f, "basis columns are not orthonormal (defect {defect:.3e})")
            }
            Error::NotUnitNorm { norm } => write!(f, "vector is not unit norm (norm {norm:.17})"),
            Error::ZeroEigenGap => write!(f, "eigenvalue gap at the requested rank is zero"),
            Error::RegimeViolation(msg) => write!(f, "unsupported parameter regime: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
