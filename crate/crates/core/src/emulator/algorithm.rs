use super::coalesce::{coalesce, coalesce_with};
use super::posterior::{argmin_mu, error_set, next_point_ei, EmulatorPosterior, GpConfig, NuggetSpec};
use crate::cost::{default_grid, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::oracle::CostOracle;
use crate::parametric::{fit_power_law, refit_power_law, ObservationSet};
use crate::types::{Method, OhsResult, Uncertainty};
use alloc::boxed::Box;
use alloc::vec::Vec;

/// Settings for the expected-improvement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EmulationConfig {
    pub gp: GpConfig,
    /// Sizes searched for acquisitions and for the final minimum; empty means
    /// the default 1000-point grid over `[1, N - 1]`.
    pub candidates: Vec<u64>,
    /// Acquisitions allowed after the initial design.
    pub max_iterations: usize,
    /// Refit the prior power law to the coalesced data before every
    /// posterior update, keeping the last good fit when a refit fails.
    pub refit_prior: bool,
    pub nugget: Option<NuggetSpec>,
}

impl EmulationConfig {
    pub fn new(gp: GpConfig, max_iterations: usize) -> Self {
        Self {
            gp,
            candidates: Vec::new(),
            max_iterations,
            refit_prior: true,
            nugget: None,
        }
    }
}

/// One acquisition of the emulation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulationStep {
    pub iteration: usize,
    pub n_acquired: u64,
    pub d: f64,
    pub variance: f64,
    /// Expected improvement at `n_acquired` when it was chosen.
    pub max_ei: f64,
    /// Minimiser of the updated posterior mean.
    pub n_star: u64,
    pub mu_at_n_star: f64,
}

/// State of a running expected-improvement search.
#[derive(Debug, Clone)]
pub struct Emulation {
    config: EmulationConfig,
    candidates: Vec<u64>,
    obs: ObservationSet,
    gp: GpConfig,
    posterior: EmulatorPosterior,
    iterations: usize,
}

impl Emulation {
    /// Evaluates the initial design and builds the first posterior.
    pub fn start<O: CostOracle + ?Sized>(
        oracle: &mut O,
        config: EmulationConfig,
        initial_design: &[u64],
    ) -> Result<Self> {
        config.gp.validate()?;
        let mut obs = ObservationSet::default();
        for &n in initial_design {
            let e = oracle.estimate(n)?;
            obs.push(n, e.value, e.variance)?;
        }
        Self::from_observations(config, obs)
    }

    /// Builds the first posterior from total-cost observations already made.
    pub fn from_observations(config: EmulationConfig, obs: ObservationSet) -> Result<Self> {
        config.gp.validate()?;
        if obs.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let candidates = if config.candidates.is_empty() {
            default_grid(config.gp.prior_n, DEFAULT_GRID_SIZE)
        } else {
            config.candidates.clone()
        };
        let gp = config.gp;
        let posterior = EmulatorPosterior::from_coalesced(Default::default(), &gp)?;
        let mut state = Self {
            config,
            candidates,
            obs,
            gp,
            posterior,
            iterations: 0,
        };
        state.update()?;
        Ok(state)
    }

    pub fn posterior(&self) -> &EmulatorPosterior {
        &self.posterior
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn candidates(&self) -> &[u64] {
        &self.candidates
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Prior settings currently in use, including any refitted power law.
    pub fn current_prior(&self) -> &GpConfig {
        &self.gp
    }

    /// Candidate with the largest expected improvement.
    pub fn best_acquisition(&self) -> Result<(u64, f64)> {
        next_point_ei(&self.posterior, &self.candidates)
    }

    /// Minimiser of the posterior mean over the candidates.
    pub fn estimate(&self) -> (u64, f64) {
        argmin_mu(&self.posterior, &self.candidates).expect("candidates are nonempty")
    }

    /// Acquires at the best candidate unless the stopping rule holds, in
    /// which case `None` is returned and nothing changes.
    pub fn step<O: CostOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Option<EmulationStep>> {
        let (n, max_ei) = self.best_acquisition()?;
        if !(max_ei > self.gp.tau) {
            return Ok(None);
        }
        Ok(Some(self.acquire(oracle, n, max_ei)?))
    }

    /// Observes the oracle at `n` and updates the posterior.
    pub fn acquire<O: CostOracle + ?Sized>(&mut self, oracle: &mut O, n: u64, ei: f64) -> Result<EmulationStep> {
        let e = oracle.estimate(n)?;
        self.obs.push(n, e.value, e.variance)?;
        self.update()?;
        let (n_star, mu_at_n_star) = self.estimate();
        let step = EmulationStep {
            iteration: self.iterations,
            n_acquired: n,
            d: e.value,
            variance: e.variance,
            max_ei: ei,
            n_star,
            mu_at_n_star,
        };
        self.iterations += 1;
        Ok(step)
    }

    fn update(&mut self) -> Result<()> {
        if self.config.refit_prior {
            self.refit_prior();
        }
        self.posterior = match &self.config.nugget {
            None => EmulatorPosterior::from_coalesced(coalesce(&self.obs), &self.gp)?,
            Some(spec) => super::posterior::posterior_with_nugget(&self.obs, &self.gp, spec)?,
        };
        Ok(())
    }

    /// Fits the prior power law to `k2` values implied by the coalesced
    /// total costs, `k2 = (d - k1 n) / (N - n)`.
    fn refit_prior(&mut self) {
        let data = match &self.config.nugget {
            Some(spec) => coalesce_with(&self.obs, spec.rule),
            None => coalesce(&self.obs),
        };
        let (k1, big_n) = (self.gp.prior_k1, self.gp.prior_n);
        let mut implied = ObservationSet::default();
        for i in 0..data.len() {
            let n = data.sizes[i] as f64;
            let rest = big_n - n;
            if rest > 0.0 {
                let ok = implied.push(
                    data.sizes[i],
                    (data.means[i] - k1 * n) / rest,
                    data.variances[i] / (rest * rest),
                );
                if ok.is_err() {
                    return;
                }
            }
        }
        let current = self.gp.prior_theta;
        let fit = refit_power_law(&implied, &current).or_else(|_| fit_power_law(&implied, Some(current)));
        match fit {
            Ok(f) => self.gp.prior_theta = f.theta,
            Err(e) => log::debug!("prior refit failed, keeping previous power law: {e}"),
        }
    }

    /// Current estimate with its error set.
    pub fn result(&self) -> OhsResult {
        let (n_star, mu) = self.estimate();
        OhsResult {
            n_star,
            min_cost: mu,
            method: Method::Emulation,
            uncertainty: Some(Uncertainty::ErrorSet(error_set(
                &self.posterior,
                n_star,
                self.gp.alpha,
                &self.candidates,
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmulationOutcome {
    pub result: OhsResult,
    /// True when the loop ended because expected improvement fell to `tau`.
    pub stopped_early: bool,
    pub state: Emulation,
}

/// Expected-improvement search for the minimiser of the total cost.
///
/// Steps are appended to `trace` as they happen.
pub fn run_emulation_algorithm<O: CostOracle + ?Sized>(
    oracle: &mut O,
    config: EmulationConfig,
    initial_design: &[u64],
    trace: &mut Vec<EmulationStep>,
) -> Result<EmulationOutcome> {
    let max_iterations = config.max_iterations;
    let mut state = Emulation::start(oracle, config, initial_design)?;
    let mut stopped_early = false;
    while state.iterations() < max_iterations {
        let step = state.step(oracle).map_err(|e| match e {
            Error::Conditioning { .. } => Error::AlgorithmFailure {
                iterations: state.iterations(),
                source: Box::new(e),
            },
            other => other,
        })?;
        match step {
            Some(s) => trace.push(s),
            None => {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(EmulationOutcome {
        result: state.result(),
        stopped_early,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{find_ohs_grid, CostParameters, PowerLawTheta};
    use crate::oracle::Estimate;

    fn gp() -> GpConfig {
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

    #[test]
    fn noiseless_convex_cost_is_located() {
        let truth = CostParameters::new(1e5, 0.4, PowerLawTheta::new(8e3, 1.1, 0.22).unwrap()).unwrap();
        let mut oracle = |n: u64| -> Result<Estimate> {
            Ok(Estimate {
                value: truth.total_cost(n as f64),
                variance: 1e-2,
            })
        };
        let mut cfg = EmulationConfig::new(gp(), 30);
        cfg.candidates = default_grid(1e5, 1000);
        let mut trace = Vec::new();
        let out = run_emulation_algorithm(&mut oracle, cfg.clone(), &[5000, 20000, 50000, 90000], &mut trace).unwrap();
        let oracle_best = find_ohs_grid(&truth.model(), &cfg.candidates).unwrap().n_star;
        let cell = 100;
        assert!(
            out.result.n_star.abs_diff(oracle_best) <= cell,
            "{} vs {oracle_best}",
            out.result.n_star
        );
        match &out.result.uncertainty {
            Some(Uncertainty::ErrorSet(s)) => assert!(s.contains(out.result.n_star) || s.members.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn large_tau_stops_immediately() {
        let mut cfg = EmulationConfig::new(gp(), 50);
        cfg.gp.tau = 1e9;
        let mut oracle = |n: u64| -> Result<Estimate> {
            Ok(Estimate {
                value: gp().prior_mean(n as f64),
                variance: 1.0,
            })
        };
        let mut trace = Vec::new();
        let out = run_emulation_algorithm(&mut oracle, cfg, &[1000, 30000], &mut trace).unwrap();
        assert!(out.stopped_early && trace.is_empty());
        assert_eq!(out.state.observations().len(), 2);
    }

    #[test]
    fn empty_design_is_rejected() {
        let mut oracle = |_: u64| -> Result<Estimate> { unreachable!() };
        let e = Emulation::start(&mut oracle, EmulationConfig::new(gp(), 1), &[]).unwrap_err();
        assert_eq!(e, Error::InsufficientData { needed: 1, got: 0 });
    }
}
