use super::ci::{asymptotic_ci, CostInputs};
use super::fit::{fit_power_law, refit_power_law, ThetaFit};
use super::ObservationSet;
use crate::cost::{default_grid, find_ohs_root, stationary_point, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::math::mean;
use crate::oracle::CostOracle;
use crate::rng;
use crate::types::{ConfidenceInterval, Method, OhsResult, Uncertainty};
use alloc::boxed::Box;
use alloc::vec::Vec;
use rand::Rng;

/// Default number of Monte Carlo draws per candidate.
pub const DEFAULT_MC_DRAWS: usize = 100;
/// Default number of candidate sizes considered per acquisition.
pub const DEFAULT_CANDIDATES: usize = 50;

/// Where the next observation should go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextPoint {
    pub n: u64,
    /// Monte Carlo mean interval width at `n`; `None` for a uniform pick.
    pub expected_width: Option<f64>,
}

/// Default candidate set: the evaluation grid over `[1, N - 1]` thinned to
/// [`DEFAULT_CANDIDATES`] points.
pub fn default_candidates(n_total: f64) -> Vec<u64> {
    let grid = default_grid(n_total, DEFAULT_GRID_SIZE);
    let step = grid.len().div_ceil(DEFAULT_CANDIDATES).max(1);
    grid.into_iter().step_by(step).collect()
}

/// Candidate minimising the expected width of the asymptotic interval for
/// the optimal size after one more observation there.
///
/// For each candidate `n`, `mc_draws` hypothetical observations are drawn
/// from the fitted curve with variance `variance_new`, appended, and the
/// data refitted. Draw `d` uses substream `d` of `seed` for every candidate,
/// so candidates are compared on common random numbers. Draws whose refit or
/// interval fails are dropped; a candidate with more than half its draws
/// dropped is ineligible. If no candidate is eligible, one is picked
/// uniformly at random.
#[allow(clippy::too_many_arguments)]
pub fn next_point_parametric(
    obs: &ObservationSet,
    fit: &ThetaFit,
    inputs: &CostInputs,
    candidates: &[u64],
    variance_new: f64,
    mc_draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<NextPoint> {
    if candidates.is_empty() {
        return Err(Error::domain("no candidate sizes"));
    }
    if candidates.len() == 1 {
        return Ok(NextPoint {
            n: candidates[0],
            expected_width: None,
        });
    }
    if !(variance_new > 0.0) || mc_draws == 0 {
        return Err(Error::domain("need a positive variance and at least one draw"));
    }
    let shocks: Vec<f64> = (0..mc_draws)
        .map(|d| rng::std_normal(&mut rng::substream(seed, d as u64)))
        .collect();
    let sd = libm::sqrt(variance_new);
    let mut best: Option<(u64, f64)> = None;
    let mut trial = obs.clone();
    for &n in candidates {
        let centre = fit.theta.k2(n as f64);
        let mut widths = Vec::with_capacity(mc_draws);
        for &z in &shocks {
            trial.clone_from(obs);
            trial.push(n, centre + sd * z, variance_new)?;
            let width = refit_power_law(&trial, &fit.theta)
                .and_then(|f| asymptotic_ci(&f, inputs, alpha))
                .map(|(ci, _)| ci.width());
            if let Ok(w) = width {
                widths.push(w);
            }
        }
        if 2 * widths.len() < mc_draws {
            continue;
        }
        let w = mean(&widths);
        if best.is_none_or(|(_, bw)| w < bw) {
            best = Some((n, w));
        }
    }
    Ok(match best {
        Some((n, w)) => NextPoint {
            n,
            expected_width: Some(w),
        },
        None => {
            log::info!("no candidate gave a finite expected width; choosing uniformly");
            let mut g = rng::substream(seed, u64::MAX - 1);
            NextPoint {
                n: candidates[g.random_range(0..candidates.len())],
                expected_width: None,
            }
        }
    })
}

/// Settings for the sequential parametric design.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricConfig {
    pub inputs: CostInputs,
    /// Sizes observed before any acquisition; at least three distinct.
    pub initial_design: Vec<u64>,
    /// Acquisitions after the initial design.
    pub iterations: usize,
    pub alpha: f64,
    /// Candidate sizes for greedy acquisition; empty means
    /// [`default_candidates`].
    pub candidates: Vec<u64>,
    pub mc_draws: usize,
    /// Probability that an acquisition is uniform on `random_range`
    /// instead of greedy.
    pub random_fraction: f64,
    /// Inclusive range for uniform acquisitions; `None` means `1..=N-1`.
    pub random_range: Option<(u64, u64)>,
    /// Variance assumed for a hypothetical new observation; `None` uses the
    /// mean variance observed so far.
    pub planning_variance: Option<f64>,
    /// Re-query the oracle at every design point before the final fit.
    pub refresh_final: bool,
    pub seed: u64,
}

impl ParametricConfig {
    pub fn new(inputs: CostInputs, initial_design: Vec<u64>, iterations: usize, seed: u64) -> Self {
        Self {
            inputs,
            initial_design,
            iterations,
            alpha: 0.1,
            candidates: Vec::new(),
            mc_draws: DEFAULT_MC_DRAWS,
            random_fraction: 0.0,
            random_range: None,
            planning_variance: None,
            refresh_final: false,
            seed,
        }
    }
}

/// One acquisition of the sequential design.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricStep {
    pub iteration: usize,
    pub n_acquired: u64,
    pub value: f64,
    pub variance: f64,
    /// True when the size was drawn uniformly rather than chosen greedily.
    pub random: bool,
    pub expected_width: Option<f64>,
    /// Continuous optimum of the fit made before this acquisition.
    pub n_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricOutcome {
    pub result: OhsResult,
    pub fit: ThetaFit,
    pub cost_interval: ConfidenceInterval,
    pub observations: ObservationSet,
}

/// Sequential parametric design: fit, acquire, observe, repeat; then
/// re-estimate the optimal size with an asymptotic interval.
///
/// Steps are appended to `trace` as they happen, so the trace is available
/// even when the final fit fails.
pub fn run_parametric_algorithm<O: CostOracle + ?Sized>(
    oracle: &mut O,
    config: &ParametricConfig,
    trace: &mut Vec<ParametricStep>,
) -> Result<ParametricOutcome> {
    let inputs = config.inputs;
    let last = (libm::floor(inputs.n_total) as u64).saturating_sub(1);
    if last < 1 {
        return Err(Error::domain("N must be at least 2"));
    }
    if config.initial_design.iter().any(|&n| n < 1 || n > last) {
        return Err(Error::domain("initial design sizes must lie in 1..=N-1"));
    }
    if !(0.0..=1.0).contains(&config.random_fraction) {
        return Err(Error::domain("random fraction must lie in [0, 1]"));
    }
    let mut distinct = config.initial_design.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    let candidates = if config.candidates.is_empty() {
        default_candidates(inputs.n_total)
    } else {
        config.candidates.clone()
    };
    let (rand_lo, rand_hi) = config.random_range.unwrap_or((1, last));

    let mut obs = ObservationSet::default();
    for &n in &config.initial_design {
        let e = oracle.estimate(n)?;
        obs.push(n, e.value, e.variance)?;
    }
    let mut decisions = rng::substream(config.seed, 0);
    let mut fit: Option<ThetaFit> = None;
    for it in 0..config.iterations {
        fit = match fit.as_ref().map(|f| refit_power_law(&obs, &f.theta)) {
            Some(Ok(f)) => Some(f),
            _ => fit_power_law(&obs, fit.as_ref().map(|f| f.theta)).ok(),
        };
        let n_hat = fit
            .as_ref()
            .and_then(|f| stationary_point(&inputs.params(f.theta).ok()?).ok());
        let go_random = decisions.random::<f64>() < config.random_fraction;
        let (pick, random) = match &fit {
            Some(f) if !go_random => {
                let var = config.planning_variance.unwrap_or_else(|| mean(obs.variances()));
                let seed = rng::derive_seed(config.seed, it as u64 + 1);
                let p = next_point_parametric(&obs, f, &inputs, &candidates, var, config.mc_draws, config.alpha, seed)?;
                (p, p.expected_width.is_none() && candidates.len() > 1)
            }
            _ => {
                if !go_random {
                    log::info!("iteration {it}: no usable fit, acquiring uniformly");
                }
                let n = rng::uniform_int(&mut decisions, rand_lo, rand_hi);
                (
                    NextPoint {
                        n,
                        expected_width: None,
                    },
                    true,
                )
            }
        };
        let e = oracle.estimate(pick.n)?;
        obs.push(pick.n, e.value, e.variance)?;
        trace.push(ParametricStep {
            iteration: it,
            n_acquired: pick.n,
            value: e.value,
            variance: e.variance,
            random,
            expected_width: pick.expected_width,
            n_hat,
        });
    }

    if config.refresh_final {
        let mut fresh = ObservationSet::default();
        for &n in obs.sizes() {
            let e = oracle.estimate(n)?;
            fresh.push(n, e.value, e.variance)?;
        }
        obs = fresh;
    }
    let fail = |source: Error| Error::AlgorithmFailure {
        iterations: config.iterations,
        source: Box::new(source),
    };
    let final_fit = fit_power_law(&obs, fit.map(|f| f.theta)).map_err(fail)?;
    let params = inputs.params(final_fit.theta).map_err(fail)?;
    let mut result = find_ohs_root(&params).map_err(fail)?;
    let (ci_n, ci_cost) = asymptotic_ci(&final_fit, &inputs, config.alpha).map_err(fail)?;
    result.method = Method::Parametric;
    result.uncertainty = Some(Uncertainty::Interval(ci_n));
    Ok(ParametricOutcome {
        result,
        fit: final_fit,
        cost_interval: ci_cost,
        observations: obs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostParameters, PowerLawTheta};
    use crate::oracle::Estimate;
    use alloc::vec;

    fn truth() -> CostParameters {
        CostParameters::new(1e5, 0.4, PowerLawTheta::new(1e4, 1.2, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn single_candidate_is_returned() {
        let t = truth().theta;
        let sizes = vec![1000, 5000, 20000, 60000];
        let obs = ObservationSet::new(
            sizes.clone(),
            sizes.iter().map(|&n| t.k2(n as f64)).collect(),
            vec![1e-4; 4],
        )
        .unwrap();
        let fit = fit_power_law(&obs, None).unwrap();
        let p = next_point_parametric(&obs, &fit, &CostInputs::known(0.4, 1e5), &[777], 1e-4, 5, 0.1, 1).unwrap();
        assert_eq!(p.n, 777);
    }

    #[test]
    fn noiseless_run_finds_true_optimum() {
        let p = truth();
        let mut oracle = |n: u64| -> Result<Estimate> {
            Ok(Estimate {
                value: p.theta.k2(n as f64),
                variance: 1e-10,
            })
        };
        let mut cfg = ParametricConfig::new(CostInputs::known(0.4, 1e5), vec![800, 3000, 9000, 30000, 70000], 8, 42);
        cfg.mc_draws = 4;
        cfg.candidates = default_candidates(1e5).into_iter().step_by(5).collect();
        let mut trace = Vec::new();
        let out = run_parametric_algorithm(&mut oracle, &cfg, &mut trace).unwrap();
        let truth_n = find_ohs_root(&p).unwrap().n_star;
        assert!(
            out.result.n_star.abs_diff(truth_n) <= 1,
            "{} vs {truth_n}",
            out.result.n_star
        );
        assert_eq!(trace.len(), 8);
        assert_eq!(out.observations.len(), 13);
    }
}
