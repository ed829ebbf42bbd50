use super::cohort::{generate_cohort, learning_curve_sensitivity, SyntheticCohort};
use super::params::{baseline_cost_k1, k2_from_sensitivity, AspreParams, Measured};
use crate::cost::{evenly_spaced, PowerLawTheta};
use crate::emulator::{run_emulation_algorithm, EmulationConfig, EmulationStep, GpConfig};
use crate::error::{Error, Result};
use crate::math::sample_variance;
use crate::oracle::{CostOracle, Estimate};
use crate::parametric::{fit_power_law, run_parametric_algorithm, ObservationSet, ParametricConfig, ParametricStep};
use crate::rng::{self, derive_seed, substream};
use crate::types::{ConfidenceInterval, OhsResult};
use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AspreAlgorithm {
    Parametric,
    Emulation,
}

impl AspreAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Parametric => "parametric",
            Self::Emulation => "emulation",
        }
    }
}

impl fmt::Display for AspreAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything the two-algorithm pipeline needs besides the algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AspreSetup {
    pub params: AspreParams,
    pub cohort_size: usize,
    pub cohort_seed: u64,
    /// Random sizes evaluated before any acquisition.
    pub initial_points: usize,
    /// Inclusive range of the initial sizes.
    pub initial_range: (u64, u64),
    pub sequential_points: usize,
    /// Learner fits per evaluated size. With one, every evaluation is
    /// given the variance of the initial fit's residuals; with more, the
    /// replicate variance of the mean.
    pub replicates: usize,
    /// Candidate sizes for acquisition, evenly spaced over
    /// `[initial_range.0, 0.8 * cohort_size]`.
    pub parametric_candidates: usize,
    pub emulation_candidates: usize,
    pub mc_draws: usize,
    /// Emulator kernel variance, in squared expected cases.
    pub sigma_u2: f64,
    /// Emulator kernel length scale.
    pub zeta: f64,
    /// Tail probability of the parametric interval.
    pub ci_alpha: f64,
    /// Error-set membership needs probability at least `1 - error_set_alpha`
    /// of beating the estimated minimum.
    pub error_set_alpha: f64,
    /// Re-evaluate every parametric design point before the final fit.
    pub refresh_final: bool,
    pub seed: u64,
}

impl AspreSetup {
    pub fn new(cohort_seed: u64, seed: u64) -> Self {
        Self {
            params: AspreParams::guideline(),
            cohort_size: 60_000,
            cohort_seed,
            initial_points: 20,
            initial_range: (500, 30_000),
            sequential_points: 100,
            replicates: 1,
            parametric_candidates: 50,
            emulation_candidates: 500,
            mc_draws: 50,
            sigma_u2: 1e4,
            zeta: 5e3,
            ci_alpha: 0.1,
            error_set_alpha: 0.9,
            refresh_final: true,
            seed,
        }
    }

    /// Largest trainable size, 80% of the cohort.
    pub fn max_size(&self) -> u64 {
        (self.cohort_size as u64 * 4) / 5
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let (lo, hi) = self.initial_range;
        if lo < 2 || lo > hi || hi > self.max_size() {
            return Err(Error::domain("initial range must lie in 2..=0.8 * cohort size"));
        }
        if self.initial_points < 3 || self.replicates == 0 {
            return Err(Error::domain("need at least 3 initial points and 1 replicate"));
        }
        if self.parametric_candidates < 2 || self.emulation_candidates < 2 {
            return Err(Error::domain("need at least 2 candidates"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AspreTrace {
    Parametric(Vec<ParametricStep>),
    Emulation(Vec<EmulationStep>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AspreOutcome {
    pub algorithm: AspreAlgorithm,
    /// Optimal size; cost in expected PRE cases among the `N` individuals.
    pub result: OhsResult,
    /// Interval for the minimum cost; parametric only.
    pub cost_interval: Option<ConfidenceInterval>,
    pub k1: Measured,
    pub n_total: f64,
    /// Fit to the initial evaluations.
    pub initial_theta: PowerLawTheta,
    /// Variance of `k2` assigned to single-fit evaluations.
    pub pooled_variance: f64,
    /// Every evaluated size in order, initial design first.
    pub design: Vec<u64>,
    pub trace: AspreTrace,
    pub cohort_seed: u64,
    pub seed: u64,
}

/// Learning-curve oracle for `k2(n)`. Evaluation `i` uses seed
/// `derive_seed(seed, i)`; queued values are replayed first.
struct K2Oracle<'a> {
    cohort: &'a SyntheticCohort,
    params: AspreParams,
    replicates: usize,
    pooled_variance: f64,
    seed: u64,
    calls: u64,
    replay: VecDeque<(u64, Estimate)>,
    log: Vec<u64>,
}

impl K2Oracle<'_> {
    fn evaluate(&mut self, n: u64) -> Result<Estimate> {
        let point = learning_curve_sensitivity(
            self.cohort,
            n,
            self.params.pi,
            self.replicates,
            derive_seed(self.seed, self.calls),
        )?;
        self.calls += 1;
        let scale = self.params.pi * (1.0 - self.params.alpha_aspirin.value);
        Ok(Estimate {
            value: k2_from_sensitivity(point.sensitivity, &self.params)?,
            variance: match point.variance {
                Some(v) => scale * scale * v / point.replicates as f64,
                None => self.pooled_variance,
            },
        })
    }
}

impl CostOracle for K2Oracle<'_> {
    fn estimate(&mut self, n: u64) -> Result<Estimate> {
        self.log.push(n);
        match self.replay.front() {
            Some(&(m, e)) if m == n => {
                self.replay.pop_front();
                Ok(e)
            }
            _ => self.evaluate(n),
        }
    }
}

/// Generates the cohort and runs [`run_aspre_on_cohort`].
pub fn run_aspre_pipeline(setup: &AspreSetup, algorithm: AspreAlgorithm) -> Result<AspreOutcome> {
    setup.validate()?;
    let cohort = generate_cohort(setup.cohort_size, setup.cohort_seed)?;
    run_aspre_on_cohort(&cohort, setup, algorithm)
}

/// Estimates the optimal holdout size from learning-curve evaluations on
/// `cohort`.
///
/// Random initial sizes are evaluated and fitted with a power law; the
/// variance of its residuals becomes the noise level of every single-fit
/// evaluation. The chosen algorithm then acquires the remaining sizes. The
/// emulator works on total costs `k1 n + k2 (N - n)` with variances scaled
/// by `(N - n)^2`.
pub fn run_aspre_on_cohort(
    cohort: &SyntheticCohort,
    setup: &AspreSetup,
    algorithm: AspreAlgorithm,
) -> Result<AspreOutcome> {
    setup.validate()?;
    if setup.cohort_size != cohort.len() {
        return Err(Error::domain("cohort size differs from setup"));
    }
    let params = setup.params;
    let k1 = baseline_cost_k1(&params)?;
    let n_total = params.n_total.value;
    let (lo, hi) = setup.initial_range;
    let mut picks = substream(setup.seed, 0);
    let initial: Vec<u64> = (0..setup.initial_points)
        .map(|_| rng::uniform_int(&mut picks, lo, hi))
        .collect();

    let mut oracle = K2Oracle {
        cohort,
        params,
        replicates: setup.replicates,
        pooled_variance: 1.0,
        seed: derive_seed(setup.seed, 1),
        calls: 0,
        replay: VecDeque::new(),
        log: Vec::new(),
    };
    let mut first = ObservationSet::default();
    for &n in &initial {
        let e = oracle.evaluate(n)?;
        first.push(n, e.value, e.variance)?;
        oracle.replay.push_back((n, e));
    }
    let unit = ObservationSet::new(
        first.sizes().to_vec(),
        first.values().to_vec(),
        alloc::vec![1.0; first.len()],
    )?;
    let initial_fit = fit_power_law(&unit, None)?;
    let residuals: Vec<f64> = first
        .sizes()
        .iter()
        .zip(first.values())
        .map(|(&n, &v)| v - initial_fit.theta.k2(n as f64))
        .collect();
    let pooled_variance = sample_variance(&residuals);
    if !(pooled_variance > 0.0) {
        return Err(Error::domain("initial residual variance is zero"));
    }
    oracle.pooled_variance = pooled_variance;
    if setup.replicates == 1 {
        for (_, e) in oracle.replay.iter_mut() {
            e.variance = pooled_variance;
        }
    }

    let inputs = params.cost_inputs()?;
    let max = setup.max_size();
    let (result, cost_interval, trace) = match algorithm {
        AspreAlgorithm::Parametric => {
            let mut config = ParametricConfig::new(inputs, initial.clone(), setup.sequential_points, setup.seed);
            config.alpha = setup.ci_alpha;
            config.candidates = evenly_spaced(lo, max, setup.parametric_candidates);
            config.mc_draws = setup.mc_draws;
            config.random_range = Some((lo, max));
            config.planning_variance = (setup.replicates == 1).then_some(pooled_variance);
            config.refresh_final = setup.refresh_final;
            let mut trace = Vec::new();
            let out = run_parametric_algorithm(&mut oracle, &config, &mut trace)?;
            (out.result, Some(out.cost_interval), AspreTrace::Parametric(trace))
        }
        AspreAlgorithm::Emulation => {
            let gp = GpConfig {
                prior_theta: initial_fit.theta,
                prior_k1: k1.value,
                prior_n: n_total,
                sigma_u2: setup.sigma_u2,
                zeta: setup.zeta,
                tau: 0.0,
                alpha: setup.error_set_alpha,
            };
            let mut config = EmulationConfig::new(gp, setup.sequential_points);
            config.candidates = evenly_spaced(lo, max, setup.emulation_candidates);
            let mut total = |n: u64| -> Result<Estimate> {
                let e = oracle.estimate(n)?;
                let rest = n_total - n as f64;
                Ok(Estimate {
                    value: k1.value * n as f64 + e.value * rest,
                    variance: e.variance * rest * rest,
                })
            };
            let mut trace = Vec::new();
            let out = run_emulation_algorithm(&mut total, config, &initial, &mut trace)?;
            (out.result, None, AspreTrace::Emulation(trace))
        }
    };
    Ok(AspreOutcome {
        algorithm,
        result,
        cost_interval,
        k1,
        n_total,
        initial_theta: initial_fit.theta,
        pooled_variance,
        design: oracle.log,
        trace,
        cohort_seed: setup.cohort_seed,
        seed: setup.seed,
    })
}
