//! Choosing how many samples to hold out when refitting a deployed risk score.
//!
//! A risk score that guides interventions cannot be refitted naively on the
//! data it has influenced. Holding out `n` of `N` samples from score-guided
//! intervention yields unbiased training data at a price: the holdout gets
//! baseline care at per-sample cost `k1`, while the remaining `N - n` samples
//! are served by a score whose per-sample cost `k2(n)` falls as `n` grows.
//! The total cost is
//!
//! ```text
//! l(n) = k1 * n + k2(n) * (N - n)
//! ```
//!
//! and this crate finds, estimates and quantifies uncertainty in its minimiser.
//!
//! * [`cost`] defines the cost model, `k2` curve families, assumption checks
//!   and exact minimisers.
//! * [`parametric`] fits a power-law `k2` to noisy observations, gives
//!   delta-method and bootstrap intervals, and runs greedy sequential design.
//! * [`emulator`] emulates `l(n)` with a Gaussian process around a parametric
//!   prior mean and acquires points by expected improvement.
//! * [`drift`] simulates populations under drift and intervention.
//! * [`aspre`] is an end-to-end worked example for pre-eclampsia screening.
//!
//! The crate is `no_std` and needs only `alloc`. All randomness is driven by
//! explicit seeds, and every floating-point routine goes through `libm`, so
//! results are reproducible bit-for-bit across platforms.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aspre;
pub mod cost;
pub mod drift;
pub mod emulator;
mod error;
pub mod learner;
pub mod math;
pub mod oracle;
pub mod parametric;
pub mod rng;
mod types;

pub use error::{BoundaryDiagnosis, Error, Result};
pub use types::{ConfidenceInterval, ErrorSet, IntervalKind, Method, OhsResult, Uncertainty};
