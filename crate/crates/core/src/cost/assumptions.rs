use crate::error::{Error, Result};
use alloc::vec::Vec;

const CONVEXITY_TOL: f64 = 1e-12;

/// Empirical check of the shape conditions under which an interior optimal
/// holdout size exists.
///
/// Indices refer to [`AssumptionReport::sizes`]: a monotonicity violation at
/// `i` means `k2` rose between `sizes[i]` and `sizes[i + 1]`; a convexity
/// violation at `i` means the slope over `[sizes[i+1], sizes[i+2]]` fell
/// below the slope over `[sizes[i], sizes[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Distinct sizes in ascending order; repeated sizes are averaged.
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
    /// Finite expected costs cannot be checked from a curve, so this is
    /// always `None` ("assumed").
    pub a1_holds: Option<bool>,
    /// `k2` non-increasing.
    pub a2_holds: bool,
    pub a2_first_violation: Option<usize>,
    pub a2_violations: usize,
    /// Sizes below some `M in (0, N)` have `k2 > k1` and sizes from `M` on
    /// have `k2 <= k1`, with at least one size on each side.
    pub a3_holds: bool,
    /// The observed size `M` at which `k2` first drops to `k1` or below.
    pub crossing_m: Option<f64>,
    /// Successive slopes non-decreasing.
    pub a4_holds: bool,
    pub a4_first_violation: Option<usize>,
    pub a4_violations: usize,
    /// `(N - M)/N (k1 - k2(M)) > k1 - k2(0)` at the best observed `M`.
    pub a5_holds: bool,
    pub a5_best_m: Option<f64>,
    /// Left side minus right side of the A5 inequality at `a5_best_m`.
    pub a5_margin: Option<f64>,
}

impl AssumptionReport {
    /// True when A2 through A5 all hold.
    pub fn all_hold(&self) -> bool {
        self.a2_holds && self.a3_holds && self.a4_holds && self.a5_holds
    }
}

/// Checks monotonicity, crossing, convexity and the A5 margin on sampled
/// `(size, k2)` pairs.
///
/// `k2(0)` is taken from the smallest supplied size; pass a size-zero sample
/// when the value at zero is known.
pub fn check_assumptions(sizes: &[f64], values: &[f64], k1: f64, n_total: f64) -> Result<AssumptionReport> {
    if sizes.len() != values.len() {
        return Err(Error::domain("sizes and values differ in length"));
    }
    if sizes.iter().chain(values).any(|v| !v.is_finite()) || sizes.iter().any(|&n| n < 0.0) {
        return Err(Error::domain("sizes and values must be finite, sizes >= 0"));
    }
    if !(k1 > 0.0) || !(n_total > 0.0) {
        return Err(Error::domain("k1 and N must be positive"));
    }
    let (xs, ys) = average_duplicates(sizes, values);
    if xs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: xs.len(),
        });
    }

    let rises: Vec<usize> = (0..xs.len() - 1)
        .filter(|&i| ys[i + 1] - ys[i] > CONVEXITY_TOL)
        .collect();

    let slopes: Vec<f64> = (0..xs.len() - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    let bends: Vec<usize> = (0..slopes.len() - 1)
        .filter(|&i| slopes[i + 1] < slopes[i] - CONVEXITY_TOL)
        .collect();

    // A3: sizes split into a prefix above k1 and a nonempty suffix at or below it
    let first_below = (0..xs.len()).find(|&i| ys[i] <= k1);
    let crossing_m = first_below.filter(|&i| i > 0 && xs[i] < n_total && ys[i..].iter().all(|&y| y <= k1));
    let crossing_m = crossing_m.map(|i| xs[i]);

    let k2_zero = ys[0];
    let rhs = k1 - k2_zero;
    let best = (0..xs.len())
        .filter(|&i| xs[i] > 0.0 && xs[i] < n_total)
        .map(|i| (xs[i], (n_total - xs[i]) / n_total * (k1 - ys[i])))
        .fold(None, |acc: Option<(f64, f64)>, (m, lhs)| match acc {
            Some((_, l)) if l >= lhs => acc,
            _ => Some((m, lhs)),
        });
    let a5_margin = best.map(|(_, lhs)| lhs - rhs);

    Ok(AssumptionReport {
        a1_holds: None,
        a2_holds: rises.is_empty(),
        a2_first_violation: rises.first().copied(),
        a2_violations: rises.len(),
        a3_holds: crossing_m.is_some(),
        crossing_m,
        a4_holds: bends.is_empty(),
        a4_first_violation: bends.first().copied(),
        a4_violations: bends.len(),
        a5_holds: a5_margin.is_some_and(|m| m > 0.0),
        a5_best_m: best.map(|(m, _)| m),
        a5_margin,
        sizes: xs,
        values: ys,
    })
}

fn average_duplicates(sizes: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = sizes.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for (n, v) in pairs {
        if xs.last() == Some(&n) {
            count += 1;
            let y = ys.last_mut().expect("paired with xs");
            *y += (v - *y) / count as f64;
        } else {
            xs.push(n);
            ys.push(v);
            count = 1;
        }
    }
    (xs, ys)
}
