use super::fit::{fit_power_law, refit_power_law, ThetaFit};
use super::gradient::{mincost_gradient_at, ohs_gradient_at};
use super::ObservationSet;
use crate::cost::{stationary_point, CostParameters, PowerLawTheta};
use crate::error::{Error, Result};
use crate::math::{quadratic_form, quantile_sorted, z_two_sided};
use crate::rng;
use crate::types::{ConfidenceInterval, IntervalKind};
use alloc::vec::Vec;

const NEGATIVE_FORM_TOL: f64 = 1e-12;
const MAX_DEGENERATE_FRACTION: f64 = 0.5;

/// `k1` and `N` with standard errors; zero errors mean known exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostInputs {
    pub k1: f64,
    pub k1_se: f64,
    pub n_total: f64,
    pub n_total_se: f64,
}

impl CostInputs {
    pub fn known(k1: f64, n_total: f64) -> Self {
        Self {
            k1,
            k1_se: 0.0,
            n_total,
            n_total_se: 0.0,
        }
    }

    pub fn params(&self, theta: PowerLawTheta) -> Result<CostParameters> {
        CostParameters::new(self.n_total, self.k1, theta)
    }

    /// Row-major 5x5 covariance of `(a, b, c, k1, N)`: the fit covariance
    /// with independent `k1` and `N` appended on the diagonal.
    pub fn covariance(&self, fit: &ThetaFit) -> [f64; 25] {
        let mut v = [0.0; 25];
        for i in 0..3 {
            for j in 0..3 {
                v[i * 5 + j] = fit.covariance[i * 3 + j];
            }
        }
        v[18] = self.k1_se * self.k1_se;
        v[24] = self.n_total_se * self.n_total_se;
        v
    }
}

/// Delta-method intervals for the optimal holdout size and the minimal cost.
///
/// The size interval is centred at the continuous optimum and clipped to
/// `[1, N - 1]`.
pub fn asymptotic_ci(
    fit: &ThetaFit,
    inputs: &CostInputs,
    alpha: f64,
) -> Result<(ConfidenceInterval, ConfidenceInterval)> {
    let params = inputs.params(fit.theta)?;
    asymptotic_ci_with_covariance(&params, &inputs.covariance(fit), alpha)
}

/// [`asymptotic_ci`] for explicit parameters and a 5x5 covariance.
pub fn asymptotic_ci_with_covariance(
    params: &CostParameters,
    covariance: &[f64; 25],
    alpha: f64,
) -> Result<(ConfidenceInterval, ConfidenceInterval)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let n = stationary_point(params)?;
    let beta = ohs_gradient_at(params, n);
    let gamma = mincost_gradient_at(params, n);
    let z = z_two_sided(alpha);
    let half = |form: f64| -> Result<f64> {
        if form < -NEGATIVE_FORM_TOL || form.is_nan() {
            return Err(Error::CovarianceInvalid(form));
        }
        Ok(z * libm::sqrt(form.max(0.0)))
    };
    let hn = half(quadratic_form(covariance, &beta.components))?;
    let hl = half(quadratic_form(covariance, &gamma.components))?;
    let last = params.n_total - 1.0;
    let cost = params.total_cost(n);
    Ok((
        ConfidenceInterval {
            lower: (n - hn).clamp(1.0, last),
            upper: (n + hn).clamp(1.0, last),
            level: 1.0 - alpha,
            kind: IntervalKind::Asymptotic,
        },
        ConfidenceInterval {
            lower: cost - hl,
            upper: cost + hl,
            level: 1.0 - alpha,
            kind: IntervalKind::Asymptotic,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    pub interval: ConfidenceInterval,
    /// Replicates whose refit failed or had no interior optimum.
    pub degenerate: usize,
    pub replicates: usize,
}

impl BootstrapCi {
    pub fn degenerate_fraction(&self) -> f64 {
        self.degenerate as f64 / self.replicates as f64
    }
}

/// Parametric bootstrap interval for the optimal holdout size.
///
/// Each replicate redraws every observation from the fitted curve with its
/// own variance, refits and re-solves for the optimum. Replicate `r` uses
/// substream `r` of `seed`.
pub fn bootstrap_ci(
    obs: &ObservationSet,
    inputs: &CostInputs,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapCi> {
    if replicates == 0 {
        return Err(Error::domain("bootstrap needs at least one replicate"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let fit = fit_power_law(obs, None)?;
    let theta = fit.theta;
    let means: Vec<f64> = obs.sizes().iter().map(|&n| theta.k2(n as f64)).collect();
    let mut estimates = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut g = rng::substream(seed, r as u64);
        let values: Vec<f64> = means
            .iter()
            .zip(obs.variances())
            .map(|(&m, &v)| rng::normal(&mut g, m, libm::sqrt(v)))
            .collect();
        let resampled = obs.with_values(values)?;
        let refit = refit_power_law(&resampled, &theta).or_else(|_| fit_power_law(&resampled, Some(theta)));
        let n_hat = refit.and_then(|f| stationary_point(&inputs.params(f.theta)?));
        if let Ok(n) = n_hat {
            estimates.push(n);
        }
    }
    let degenerate = replicates - estimates.len();
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * replicates as f64 {
        return Err(Error::CiUndefined {
            degenerate,
            total: replicates,
        });
    }
    estimates.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        interval: ConfidenceInterval {
            lower: quantile_sorted(&estimates, 0.5 * alpha),
            upper: quantile_sorted(&estimates, 1.0 - 0.5 * alpha),
            level: 1.0 - alpha,
            kind: IntervalKind::Bootstrap,
        },
        degenerate,
        replicates,
    })
}
