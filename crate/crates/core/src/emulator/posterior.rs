use super::coalesce::{coalesce, coalesce_with, CoalesceRule, CoalescedObservations};
use crate::cost::PowerLawTheta;
use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf, Cholesky};
use crate::parametric::ObservationSet;
use crate::types::ErrorSet;
use alloc::vec;
use alloc::vec::Vec;

/// Relative jitter levels tried, in units of `sigma_u2`, when the kernel
/// system is not numerically positive definite.
pub const JITTER_LEVELS: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Prior and stopping settings for the cost emulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    /// Power law in the prior mean `k1 n + k2(n) (N - n)`.
    pub prior_theta: PowerLawTheta,
    pub prior_k1: f64,
    pub prior_n: f64,
    /// Kernel variance, in squared cost units.
    pub sigma_u2: f64,
    /// Kernel length scale, in holdout-size units.
    pub zeta: f64,
    /// Stop once the best expected improvement is at most `tau`.
    pub tau: f64,
    /// Tail probability for the error set.
    pub alpha: f64,
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior_theta.validate()?;
        if !(self.sigma_u2 > 0.0) || !self.sigma_u2.is_finite() {
            return Err(Error::domain("sigma_u2 must be positive"));
        }
        if !(self.zeta > 0.0) || !self.zeta.is_finite() {
            return Err(Error::domain("zeta must be positive"));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::domain("tau must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha must lie in (0, 1)"));
        }
        if !(self.prior_k1 > 0.0) || !(self.prior_n >= 2.0) {
            return Err(Error::domain("prior k1 must be positive and prior N at least 2"));
        }
        Ok(())
    }

    /// Prior mean of the total cost at `n`.
    pub fn prior_mean(&self, n: f64) -> f64 {
        self.prior_k1 * n + self.prior_theta.k2(n) * (self.prior_n - n)
    }

    /// Squared-exponential covariance `sigma_u2 exp(-((n - m) / zeta)^2)`.
    pub fn kernel(&self, n: f64, m: f64) -> f64 {
        let z = (n - m) / self.zeta;
        self.sigma_u2 * libm::exp(-z * z)
    }
}

/// Size-dependent nugget variance `kappa(n) = scale * n^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nugget {
    pub scale: f64,
    pub exponent: f64,
}

impl Nugget {
    pub fn eval(&self, n: f64) -> f64 {
        self.scale * libm::pow(n, -self.exponent)
    }
}

/// Nugget variant of the emulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuggetSpec {
    pub kappa: Nugget,
    /// Also place the coalesced observation variances on the diagonal.
    pub observation_variance: bool,
    pub rule: CoalesceRule,
}

impl NuggetSpec {
    pub fn new(kappa: Nugget) -> Self {
        Self {
            kappa,
            observation_variance: false,
            rule: CoalesceRule::Mean,
        }
    }
}

/// Gaussian-process posterior for the total cost given coalesced data.
#[derive(Debug, Clone)]
pub struct EmulatorPosterior {
    config: GpConfig,
    data: CoalescedObservations,
    points: Vec<f64>,
    chol: Option<Cholesky>,
    /// `A^{-1} (d - m)` for the design points.
    weights: Vec<f64>,
    nugget: Option<Nugget>,
    reference: f64,
    jitter: f64,
}

/// Posterior from raw observations of the total cost.
pub fn posterior(obs: &ObservationSet, config: &GpConfig) -> Result<EmulatorPosterior> {
    EmulatorPosterior::from_coalesced(coalesce(obs), config)
}

/// Posterior with an additional uncorrelated nugget process.
///
/// The diagonal of the design system holds `kappa(n)` (plus the observation
/// variances when requested), `psi` includes `kappa(n)`, and expected
/// improvement is measured against the smallest posterior mean at a design
/// point rather than the smallest observed value.
pub fn posterior_with_nugget(obs: &ObservationSet, config: &GpConfig, spec: &NuggetSpec) -> Result<EmulatorPosterior> {
    EmulatorPosterior::build(coalesce_with(obs, spec.rule), config, Some(spec))
}

impl EmulatorPosterior {
    pub fn from_coalesced(data: CoalescedObservations, config: &GpConfig) -> Result<Self> {
        Self::build(data, config, None)
    }

    fn build(data: CoalescedObservations, config: &GpConfig, nugget: Option<&NuggetSpec>) -> Result<Self> {
        config.validate()?;
        if let Some(s) = nugget {
            if !(s.kappa.scale >= 0.0) || !s.kappa.exponent.is_finite() {
                return Err(Error::domain("nugget scale must be non-negative"));
            }
        }
        let points: Vec<f64> = data.sizes.iter().map(|&n| n as f64).collect();
        let m = points.len();
        let diag: Vec<f64> = (0..m)
            .map(|i| match nugget {
                None => data.variances[i],
                Some(s) => s.kappa.eval(points[i]) + if s.observation_variance { data.variances[i] } else { 0.0 },
            })
            .collect();
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..i {
                let k = config.kernel(points[i], points[j]);
                a[i * m + j] = k;
                a[j * m + i] = k;
            }
            a[i * m + i] = config.sigma_u2 + diag[i];
        }
        let residual: Vec<f64> = (0..m).map(|i| data.means[i] - config.prior_mean(points[i])).collect();

        let (chol, jitter) = if m == 0 {
            (None, 0.0)
        } else {
            factor_with_jitter(&mut a, m, config.sigma_u2)?
        };
        let mut weights = residual;
        if let Some(ch) = &chol {
            ch.solve_in_place(&mut weights);
        }
        let mut post = Self {
            config: *config,
            data,
            points,
            chol,
            weights,
            nugget: nugget.map(|s| s.kappa),
            reference: f64::INFINITY,
            jitter,
        };
        post.reference = match nugget {
            None => post.data.min_mean().unwrap_or(f64::INFINITY),
            Some(_) => post.points.iter().map(|&n| post.mu(n)).fold(f64::INFINITY, f64::min),
        };
        Ok(post)
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn data(&self) -> &CoalescedObservations {
        &self.data
    }

    /// Diagonal jitter that was needed to factorise, in absolute units.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Reference value for expected improvement: the smallest coalesced
    /// value, or the smallest posterior mean at a design point for the
    /// nugget variant. `+inf` without data.
    pub fn best_reference(&self) -> f64 {
        self.reference
    }

    fn cross(&self, n: f64) -> Vec<f64> {
        self.points.iter().map(|&p| self.config.kernel(n, p)).collect()
    }

    pub fn mu(&self, n: f64) -> f64 {
        let k = self.cross(n);
        let shift: f64 = k.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        self.config.prior_mean(n) + shift
    }

    /// Posterior variance, clamped at zero.
    pub fn psi(&self, n: f64) -> f64 {
        self.mu_psi(n).1
    }

    /// Posterior mean and variance from a single triangular solve.
    pub fn mu_psi(&self, n: f64) -> (f64, f64) {
        let mut k = self.cross(n);
        let shift: f64 = k.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let mu = self.config.prior_mean(n) + shift;
        let explained = match &self.chol {
            Some(ch) => {
                ch.forward(&mut k);
                k.iter().map(|v| v * v).sum()
            }
            None => 0.0,
        };
        let extra = self.nugget.map_or(0.0, |g| g.eval(n));
        let psi = self.config.sigma_u2 + extra - explained;
        (mu, psi.max(0.0))
    }

    pub fn expected_improvement(&self, n: f64) -> f64 {
        let (mu, psi) = self.mu_psi(n);
        ei_formula(self.reference, mu, psi)
    }
}

fn factor_with_jitter(a: &mut [f64], m: usize, sigma_u2: f64) -> Result<(Option<Cholesky>, f64)> {
    if let Some(ch) = Cholesky::new(a, m) {
        return Ok((Some(ch), 0.0));
    }
    let mut added = 0.0;
    for level in JITTER_LEVELS {
        let target = level * sigma_u2;
        for i in 0..m {
            a[i * m + i] += target - added;
        }
        added = target;
        if let Some(ch) = Cholesky::new(a, m) {
            log::debug!("kernel system needed jitter {target:e}");
            return Ok((Some(ch), target));
        }
    }
    Err(Error::Conditioning { jitter: added })
}

/// `E[max(0, reference - L)]` for `L ~ N(mu, psi)`; `max(0, reference - mu)`
/// when `psi = 0`.
pub fn ei_formula(reference: f64, mu: f64, psi: f64) -> f64 {
    let gap = reference - mu;
    if !(psi > 0.0) {
        return gap.max(0.0);
    }
    if gap == f64::INFINITY {
        return f64::INFINITY;
    }
    let s = libm::sqrt(psi);
    let z = gap / s;
    (gap * norm_cdf(z) + s * norm_pdf(z)).max(0.0)
}

/// Expected improvement of the posterior at `n`.
pub fn expected_improvement(n: u64, posterior: &EmulatorPosterior) -> f64 {
    posterior.expected_improvement(n as f64)
}

/// Candidate with the largest expected improvement, with that value; ties
/// go to the smallest size.
pub fn next_point_ei(posterior: &EmulatorPosterior, candidates: &[u64]) -> Result<(u64, f64)> {
    let mut best: Option<(u64, f64)> = None;
    for &n in candidates {
        let ei = posterior.expected_improvement(n as f64);
        best = match best {
            Some((bn, be)) if be > ei || (be == ei && bn < n) => Some((bn, be)),
            _ => Some((n, ei)),
        };
    }
    best.ok_or_else(|| Error::domain("no candidate sizes"))
}

/// Candidate sizes `n` with posterior probability at least `1 - alpha` that
/// the cost at `n` is below the posterior mean at `n_star`.
///
/// Where the posterior variance is zero the probability is degenerate and
/// membership requires `mu(n) < mu(n_star)` strictly.
pub fn error_set(posterior: &EmulatorPosterior, n_star: u64, alpha: f64, candidates: &[u64]) -> ErrorSet {
    let target = posterior.mu(n_star as f64);
    let mut members: Vec<u64> = candidates
        .iter()
        .copied()
        .filter(|&n| {
            let (mu, psi) = posterior.mu_psi(n as f64);
            if psi > 0.0 {
                norm_cdf((target - mu) / libm::sqrt(psi)) >= 1.0 - alpha
            } else {
                mu < target
            }
        })
        .collect();
    members.sort_unstable();
    members.dedup();
    ErrorSet { members, alpha }
}

/// Candidate minimising the posterior mean; ties go to the larger size.
pub fn argmin_mu(posterior: &EmulatorPosterior, candidates: &[u64]) -> Option<(u64, f64)> {
    let mut best: Option<(u64, f64)> = None;
    for &n in candidates {
        let mu = posterior.mu(n as f64);
        best = match best {
            Some((bn, bm)) if bm < mu || (bm == mu && bn > n) => Some((bn, bm)),
            _ => Some((n, mu)),
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::default_grid;

    fn config() -> GpConfig {
        GpConfig {
            prior_theta: PowerLawTheta::new(1e4, 1.2, 0.2).unwrap(),
            prior_k1: 0.4,
            prior_n: 1e5,
            sigma_u2: 1e7,
            zeta: 5000.0,
            tau: 0.0,
            alpha: 0.1,
        }
    }

    fn truth_cost(n: f64) -> f64 {
        config().prior_mean(n)
    }

    #[test]
    fn empty_data_is_prior() {
        let p = posterior(&ObservationSet::default(), &config()).unwrap();
        for n in [10.0, 5e4, 9e4] {
            assert_eq!(p.mu(n), truth_cost(n));
            assert_eq!(p.psi(n), 1e7);
        }
    }

    #[test]
    fn psi_dips_at_design_points() {
        let sizes = vec![20_000, 40_000, 60_000];
        let obs = ObservationSet::new(
            sizes.clone(),
            sizes.iter().map(|&n| truth_cost(n as f64) + 500.0).collect(),
            vec![1e4; 3],
        )
        .unwrap();
        let p = posterior(&obs, &config()).unwrap();
        for w in sizes.windows(2) {
            let mid = 0.5 * (w[0] + w[1]) as f64;
            assert!(p.psi(w[0] as f64) < p.psi(mid));
            assert!(p.psi(w[1] as f64) < p.psi(mid));
        }
        // EI has local minima at the design points
        let grid = default_grid(1e5, 1000);
        let (best, _) = next_point_ei(&p, &grid).unwrap();
        assert!(sizes.iter().all(|&s| s.abs_diff(best) > 100), "{best}");
    }

    #[test]
    fn posterior_reverts_to_prior_far_away() {
        let obs = ObservationSet::new(vec![1000, 2000], vec![5e4, 4e4], vec![1e3, 1e3]).unwrap();
        let p = posterior(&obs, &config()).unwrap();
        let far = 2000.0 + 11.0 * 5000.0;
        assert!((p.mu(far) - truth_cost(far)).abs() < 1e-6 * libm::sqrt(1e7));
        assert!((p.psi(far) - 1e7).abs() < 1e-6 * 1e7);
    }

    #[test]
    fn ei_formula_cases() {
        assert_eq!(ei_formula(5.0, 5.0, 0.0), 0.0);
        assert_eq!(ei_formula(5.0, 3.0, 0.0), 2.0);
        assert!((ei_formula(1.0, 1.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_smallest_size() {
        let mut cfg = config();
        // constant prior mean: k1 = c and tiny a
        cfg.prior_theta = PowerLawTheta::new(1e-300, 1.0, 0.4).unwrap();
        let p = posterior(
            &ObservationSet::new(vec![50_000], vec![cfg.prior_mean(5e4)], vec![1.0]).unwrap(),
            &cfg,
        )
        .unwrap();
        let (n, _) = next_point_ei(&p, &[97_000, 3_000]).unwrap();
        assert_eq!(n, 3_000);
        assert_eq!(next_point_ei(&p, &[42]).unwrap().0, 42);
    }

    #[test]
    fn error_set_median_comparison() {
        let sizes: Vec<u64> = (1..=9).map(|i| i * 10_000).collect();
        let obs = ObservationSet::new(
            sizes.clone(),
            sizes.iter().map(|&n| truth_cost(n as f64)).collect(),
            vec![1e5; 9],
        )
        .unwrap();
        let p = posterior(&obs, &config()).unwrap();
        let grid = default_grid(1e5, 200);
        let (n_star, mu_star) = argmin_mu(&p, &grid).unwrap();
        let set = error_set(&p, n_star, 0.5, &grid);
        assert!(set.contains(n_star));
        for &n in &grid {
            assert_eq!(set.contains(n), p.mu(n as f64) <= mu_star, "n={n}");
        }
    }

    #[test]
    fn nugget_identity_and_floor() {
        let obs = ObservationSet::new(vec![10_000, 30_000], vec![4e4, 3e4], vec![2e5, 3e5]).unwrap();
        let plain = posterior(&obs, &config()).unwrap();
        let spec = NuggetSpec {
            kappa: Nugget {
                scale: 0.0,
                exponent: 0.0,
            },
            observation_variance: true,
            rule: CoalesceRule::Mean,
        };
        let nug = posterior_with_nugget(&obs, &config(), &spec).unwrap();
        for n in [5e3, 1e4, 2e4, 7e4] {
            assert_eq!(plain.mu_psi(n), nug.mu_psi(n));
        }

        let kappa = 5e5;
        let reps = ObservationSet::new(vec![10_000; 50], vec![4e4; 50], vec![1.0; 50]).unwrap();
        let spec = NuggetSpec::new(Nugget {
            scale: kappa,
            exponent: 0.0,
        });
        let p = posterior_with_nugget(&reps, &config(), &spec).unwrap();
        let floor = kappa * (1.0 - kappa / (kappa + 1e7));
        assert!(p.psi(1e4) >= floor);
    }

    #[test]
    fn decreasing_nugget_trusts_large_sizes_more() {
        let obs = ObservationSet::new(vec![1_000, 80_000], vec![5e4, 4e4], vec![1.0, 1.0]).unwrap();
        let spec = NuggetSpec::new(Nugget {
            scale: 1e9,
            exponent: 1.0,
        });
        let p = posterior_with_nugget(&obs, &config(), &spec).unwrap();
        assert!(p.psi(80_000.0) < p.psi(1_000.0));
    }
}
