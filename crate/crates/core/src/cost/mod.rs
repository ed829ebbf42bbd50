//! The total-cost model `l(n) = k1 n + k2(n) (N - n)` and exact minimisers.

mod assumptions;
mod curve;

pub use assumptions::{check_assumptions, AssumptionReport};
pub use curve::{k2_double_descent, k2_power_law, CostCurve, GaussianBump, PowerLawTheta, TabulatedCurve};

use crate::error::{BoundaryDiagnosis, Error, Result};
use crate::types::{Method, OhsResult};
use alloc::vec::Vec;

/// Number of points in the default evaluation grid.
pub const DEFAULT_GRID_SIZE: usize = 1000;

const ROOT_REL_TOL: f64 = 1e-8;
const ROOT_MAX_ITER: usize = 200;

/// `N`, `k1` and power-law `k2` parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParameters {
    /// Total number of samples `N`. Real-valued so that sensitivities in `N`
    /// are well defined; integral in practice.
    pub n_total: f64,
    /// Expected per-sample cost under baseline care.
    pub k1: f64,
    pub theta: PowerLawTheta,
}

impl CostParameters {
    pub fn new(n_total: f64, k1: f64, theta: PowerLawTheta) -> Result<Self> {
        let p = Self { n_total, k1, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_total >= 2.0) || !self.n_total.is_finite() {
            return Err(Error::domain("N must be finite and at least 2"));
        }
        if !(self.k1 > 0.0) || !self.k1.is_finite() {
            return Err(Error::domain("k1 must be positive and finite"));
        }
        self.theta.validate()
    }

    pub fn model(&self) -> CostModel {
        CostModel {
            n_total: self.n_total,
            k1: self.k1,
            curve: CostCurve::PowerLaw(self.theta),
        }
    }

    /// `l(n)` under the power-law curve.
    pub fn total_cost(&self, n: f64) -> f64 {
        if n == self.n_total {
            return self.k1 * self.n_total;
        }
        self.k1 * n + self.theta.k2(n) * (self.n_total - n)
    }

    /// `l'(n) = (k1 - k2(n)) + k2'(n) (N - n)`.
    pub fn cost_slope(&self, n: f64) -> f64 {
        self.k1 - self.theta.k2(n) + self.theta.k2_prime(n) * (self.n_total - n)
    }

    /// `l''(n) = -2 k2'(n) + k2''(n) (N - n)`.
    pub fn cost_curvature(&self, n: f64) -> f64 {
        -2.0 * self.theta.k2_prime(n) + self.theta.k2_second(n) * (self.n_total - n)
    }

    /// Largest valid holdout size, `floor(N) - 1`.
    pub fn last_size(&self) -> u64 {
        libm::floor(self.n_total) as u64 - 1
    }
}

/// `N`, `k1` and an arbitrary `k2` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub n_total: f64,
    pub k1: f64,
    pub curve: CostCurve,
}

impl CostModel {
    pub fn new(n_total: f64, k1: f64, curve: CostCurve) -> Result<Self> {
        if !(n_total >= 2.0) || !n_total.is_finite() {
            return Err(Error::domain("N must be finite and at least 2"));
        }
        if !(k1 > 0.0) || !k1.is_finite() {
            return Err(Error::domain("k1 must be positive and finite"));
        }
        Ok(Self { n_total, k1, curve })
    }

    /// Total cost `k1 n + k2(n) (N - n)` for `0 <= n <= N`.
    ///
    /// `l(N) = k1 N` exactly. At `n = 0` the parametric families diverge and
    /// the result is `+inf`; tabulated curves use their value at zero.
    pub fn total_cost(&self, n: f64) -> Result<f64> {
        if !(0.0..=self.n_total).contains(&n) {
            return Err(Error::domain("holdout size outside [0, N]"));
        }
        if n == self.n_total {
            return Ok(self.k1 * self.n_total);
        }
        let k2 = self.curve.k2(n)?;
        Ok(self.k1 * n + k2 * (self.n_total - n))
    }

    /// Slope of the total cost, `(k1 - k2(n)) + k2'(n) (N - n)`, on `(0, N]`.
    pub fn cost_derivative(&self, n: f64) -> Result<f64> {
        if !(n > 0.0 && n <= self.n_total) {
            return Err(Error::domain("holdout size outside (0, N]"));
        }
        let slope = self.curve.derivative(n)?;
        Ok(self.k1 - self.curve.k2(n)? + slope * (self.n_total - n))
    }

    /// Valid holdout sizes are `1..=N-1`.
    pub fn last_size(&self) -> u64 {
        libm::floor(self.n_total) as u64 - 1
    }
}

/// `count` evenly spaced integers over `[1, N - 1]`, deduplicated.
pub fn default_grid(n_total: f64, count: usize) -> Vec<u64> {
    let last = (libm::floor(n_total) as u64).saturating_sub(1).max(1);
    evenly_spaced(1, last, count)
}

/// `count` evenly spaced integers over `[lo, hi]`, rounded and deduplicated.
pub fn evenly_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 || hi <= lo {
        return alloc::vec![lo];
    }
    let span = (hi - lo) as f64;
    let mut grid: Vec<u64> = (0..count)
        .map(|i| lo + libm::round(span * i as f64 / (count - 1) as f64) as u64)
        .collect();
    grid.dedup();
    grid
}

/// Grid point with the smallest total cost; ties go to the larger size.
pub fn find_ohs_grid(model: &CostModel, grid: &[u64]) -> Result<OhsResult> {
    if grid.is_empty() {
        return Err(Error::domain("empty grid"));
    }
    let last = model.last_size();
    let mut best: Option<(u64, f64)> = None;
    for &n in grid {
        if n < 1 || n > last {
            return Err(Error::domain("grid entries must lie in 1..=N-1"));
        }
        let cost = model.total_cost(n as f64)?;
        best = match best {
            Some((bn, bc)) if cost > bc || (cost == bc && n < bn) => Some((bn, bc)),
            _ => Some((n, cost)),
        };
    }
    let (n_star, min_cost) = best.expect("grid is nonempty");
    Ok(OhsResult {
        n_star,
        min_cost,
        method: Method::Grid,
        uncertainty: None,
    })
}

/// Continuous stationary point of `l` for a power-law curve, found by
/// bisection on the sign change of `l'` over `[1, N - 1]`.
///
/// `l'` is increasing whenever `k2` is decreasing and convex, so a bracketed
/// sign change is the unique minimiser.
pub fn stationary_point(params: &CostParameters) -> Result<f64> {
    params.validate()?;
    if params.k1 <= params.theta.c {
        return Err(Error::NoInteriorOhs(BoundaryDiagnosis::ScoreNeverPaysOff));
    }
    let mut lo = 1.0;
    let mut hi = params.n_total - 1.0;
    if hi <= lo {
        return Err(Error::domain("N too small for an interior holdout"));
    }
    if params.cost_slope(lo) >= 0.0 {
        return Err(Error::NoInteriorOhs(BoundaryDiagnosis::IncreasingFromStart));
    }
    if params.cost_slope(hi) <= 0.0 {
        return Err(Error::NoInteriorOhs(BoundaryDiagnosis::NoCrossingBeforeN));
    }
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if params.cost_slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= ROOT_REL_TOL * mid {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Optimal holdout size for a power-law curve via the root of `l'`.
///
/// Returns whichever of the neighbouring integers has the smaller cost
/// (ties to the larger size).
pub fn find_ohs_root(params: &CostParameters) -> Result<OhsResult> {
    let root = stationary_point(params)?;
    let last = params.last_size().max(1);
    let lo = (libm::floor(root) as u64).clamp(1, last);
    let hi = (libm::ceil(root) as u64).clamp(1, last);
    let (cl, ch) = (params.total_cost(lo as f64), params.total_cost(hi as f64));
    let (n_star, min_cost) = if cl < ch { (lo, cl) } else { (hi, ch) };
    Ok(OhsResult {
        n_star,
        min_cost,
        method: Method::Root,
        uncertainty: None,
    })
}
