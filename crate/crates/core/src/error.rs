use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Why no interior optimum exists for a set of cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryDiagnosis {
    /// `k1 <= c`: even a perfect score never beats baseline care.
    ScoreNeverPaysOff,
    /// `k2` stays above `k1` on the whole of `(0, N)`.
    NoCrossingBeforeN,
    /// The total cost already rises at `n = 1`, so the smallest holdout wins.
    IncreasingFromStart,
}

impl fmt::Display for BoundaryDiagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ScoreNeverPaysOff => f.write_str(
                "assumption 3 fails: k1 <= c, so the risk score never pays off and holding out is never worthwhile",
            ),
            Self::NoCrossingBeforeN => f.write_str(
                "assumption 3 fails: k2(n) stays above k1 for every n < N, so the score never beats baseline care",
            ),
            Self::IncreasingFromStart => {
                f.write_str("total cost increases from n = 1: k1 is not below k2 near zero, hold out nothing useful")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("insufficient data: need at least {needed} distinct sizes, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no interior optimal holdout size: {0}")]
    NoInteriorOhs(BoundaryDiagnosis),

    #[error("fit failed: {reason} (objective {objective:.6e}, {iterations} iterations)")]
    FitFailure {
        reason: String,
        objective: f64,
        iterations: usize,
    },

    #[error("covariance invalid: quadratic form {0:.3e} is negative")]
    CovarianceInvalid(f64),

    #[error("confidence interval undefined: {degenerate} of {total} bootstrap replicates had no interior optimum")]
    CiUndefined { degenerate: usize, total: usize },

    #[error("linear system is not positive definite even after jitter {jitter:.3e}; consider a larger nugget")]
    Conditioning { jitter: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("oracle failed at n = {n}: {message}")]
    Oracle { n: u64, message: String },

    #[error("algorithm failed after {iterations} iterations: {source}")]
    AlgorithmFailure {
        iterations: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::Unsupported(_) => "unsupported",
            Self::InsufficientData { .. } => "insufficient_data",
            Self::NoInteriorOhs(_) => "no_interior_ohs",
            Self::FitFailure { .. } => "fit_failure",
            Self::CovarianceInvalid(_) => "covariance_invalid",
            Self::CiUndefined { .. } => "ci_undefined",
            Self::Conditioning { .. } => "conditioning",
            Self::Calibration(_) => "calibration",
            Self::Oracle { .. } => "oracle",
            Self::AlgorithmFailure { .. } => "algorithm_failure",
        }
    }

    /// True for failures that come from bad inputs rather than numerics.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Self::Domain(_)
                | Self::Unsupported(_)
                | Self::InsufficientData { .. }
                | Self::NoInteriorOhs(_)
                | Self::Oracle { .. }
        )
    }
}
