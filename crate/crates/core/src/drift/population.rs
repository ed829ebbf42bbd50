use crate::error::{Error, Result};
use crate::learner::{Dataset, LogisticConfig, LogisticModel};
use crate::math::{logistic, Cholesky};
use crate::rng::{self, substream};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use rand::Rng;

/// A population observed at successive timepoints, with a risk score
/// refitted at the end of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    pub population_size: usize,
    /// Covariates the risk score can see.
    pub n_visible: usize,
    /// Covariates that affect risk but are hidden from the score.
    pub n_latent: usize,
    pub timepoints_per_epoch: usize,
    pub epochs: usize,
    /// Fraction of the population with the highest predicted risk that is
    /// treated.
    pub treat_fraction: f64,
    /// Treatment shrinks every risk-raising covariate contribution, visible
    /// or latent, by this factor.
    pub intervention_effect: f64,
    /// Standard deviation of the temporal drift in each coefficient.
    pub drift_scale: f64,
    /// Samples withheld from treatment at the last timepoint of each epoch
    /// by the holdout strategy.
    pub holdout_size: usize,
    pub seed: u64,
}

impl PopulationConfig {
    /// 20 000 samples over 5 epochs of 10 timepoints, 22 visible covariates
    /// and one latent covariate.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            population_size: 20_000,
            n_visible: 22,
            n_latent: 1,
            timepoints_per_epoch: 10,
            epochs: 5,
            treat_fraction: 0.1,
            intervention_effect: 1.0,
            drift_scale: 0.4,
            holdout_size: 2_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 1 || self.timepoints_per_epoch < 1 || self.epochs < 1 {
            return Err(Error::domain(
                "population size, epoch length and epoch count must be at least 1",
            ));
        }
        if !(self.treat_fraction > 0.0 && self.treat_fraction < 1.0) {
            return Err(Error::domain("treat fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.intervention_effect) {
            return Err(Error::domain("intervention effect must lie in [0, 1]"));
        }
        if !(self.drift_scale >= 0.0 && self.drift_scale.is_finite()) {
            return Err(Error::domain("drift scale must be non-negative"));
        }
        if self.holdout_size < 1 || self.holdout_size >= self.population_size {
            return Err(Error::domain("holdout size must lie in 1..population_size"));
        }
        Ok(())
    }

    pub fn timepoints(&self) -> usize {
        self.timepoints_per_epoch * self.epochs
    }

    fn n_covariates(&self) -> usize {
        self.n_visible + self.n_latent
    }

    /// True for the final timepoint of an epoch, when scores are refitted.
    pub fn is_epoch_end(&self, t: usize) -> bool {
        (t + 1).is_multiple_of(self.timepoints_per_epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// Keep the initial score for ever.
    NoUpdate,
    /// Refit on everyone seen at the end of each epoch, treated or not.
    NaiveUpdate,
    /// Refit only on an untreated holdout set of the given size.
    HoldoutUpdate(usize),
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NoUpdate => "no_update",
            Self::NaiveUpdate => "naive_update",
            Self::HoldoutUpdate(_) => "holdout_update",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Logistic true-risk function whose slopes drift smoothly over time.
///
/// Each slope follows its baseline plus a stationary Gaussian process of
/// time with squared-exponential correlation and a length-scale of one
/// epoch, realised exactly on the integer timepoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftProcess {
    pub intercept: f64,
    n_coef: usize,
    /// Slopes at each timepoint, timepoint-major.
    paths: Vec<f64>,
}

impl DriftProcess {
    pub fn sample<R: Rng + ?Sized>(
        intercept: f64,
        baseline: &[f64],
        timepoints: usize,
        length_scale: f64,
        drift_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n_coef = baseline.len();
        let mut paths: Vec<f64> = (0..timepoints).flat_map(|_| baseline.iter().copied()).collect();
        if drift_scale > 0.0 && timepoints > 0 {
            let chol = time_correlation(timepoints, length_scale)?;
            let mut z = vec![0.0; timepoints];
            for j in 0..n_coef {
                z.iter_mut().for_each(|v| *v = rng::std_normal(rng));
                // L z for the correlated path
                let mut path = vec![0.0; timepoints];
                for (t, out) in path.iter_mut().enumerate() {
                    *out = (0..=t).map(|k| chol.lower(t, k) * z[k]).sum::<f64>();
                }
                for t in 0..timepoints {
                    paths[t * n_coef + j] += drift_scale * path[t];
                }
            }
        }
        Ok(Self {
            intercept,
            n_coef,
            paths,
        })
    }

    pub fn timepoints(&self) -> usize {
        self.paths.len().checked_div(self.n_coef).unwrap_or(0)
    }

    pub fn slopes(&self, t: usize) -> &[f64] {
        &self.paths[t * self.n_coef..(t + 1) * self.n_coef]
    }

    pub fn risk(&self, t: usize, x: &[f64]) -> f64 {
        logistic(self.intercept + self.slopes(t).iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
    }
}

fn time_correlation(timepoints: usize, length_scale: f64) -> Result<Cholesky> {
    let mut k = vec![0.0; timepoints * timepoints];
    for i in 0..timepoints {
        for j in 0..timepoints {
            let u = (i as f64 - j as f64) / length_scale;
            k[i * timepoints + j] = libm::exp(-0.5 * u * u);
        }
    }
    // smooth kernels are near-singular on dense grids
    for jitter in [1e-10, 1e-8, 1e-6, 1e-4] {
        let mut kj = k.clone();
        for i in 0..timepoints {
            kj[i * timepoints + i] += jitter;
        }
        if let Some(ch) = Cholesky::new(&kj, timepoints) {
            return Ok(ch);
        }
    }
    Err(Error::Conditioning { jitter: 1e-4 })
}

/// Marks the `round(fraction * eligible)` eligible samples with the highest
/// scores. Ties go to the lower index.
pub fn allocate_treatment(scores: &[f64], eligible: &[bool], fraction: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| eligible[i]).collect();
    let k = libm::round(fraction * idx.len() as f64) as usize;
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut treated = vec![false; scores.len()];
    for &i in &idx[..k.min(idx.len())] {
        treated[i] = true;
    }
    treated
}

/// Shrinks each covariate whose contribution raises risk.
pub fn apply_intervention(x: &mut [f64], slopes: &[f64], effect: f64) {
    for (v, b) in x.iter_mut().zip(slopes) {
        if b * *v > 0.0 {
            *v *= 1.0 - effect;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub strategy: StrategyKind,
    /// Sum of post-intervention true risks over the population.
    pub cost: f64,
    pub treated: usize,
    /// Holdout members at this timepoint, zero outside holdout timepoints.
    pub holdout: usize,
    /// Holdout members that were treated anyway; always zero.
    pub holdout_treated: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceTrace {
    pub rows: Vec<TraceRow>,
}

impl DominanceTrace {
    /// Per-timepoint costs of one strategy, in time order.
    pub fn costs(&self, strategy: StrategyKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| r.cost)
            .collect()
    }

    /// Mean cost over timepoints `from..`.
    pub fn mean_cost_from(&self, strategy: StrategyKind, from: usize) -> f64 {
        let c: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.strategy == strategy && r.t >= from)
            .map(|r| r.cost)
            .collect();
        c.iter().sum::<f64>() / c.len() as f64
    }
}

/// Visible covariates with a large baseline effect; the rest are weak.
const STRONG_COVARIATES: usize = 3;
const STRONG_SLOPE: f64 = 2.0;

/// Score features: each visible covariate and its square. Treatment leaves
/// a sample's risk-raising covariates near zero, which a linear score
/// cannot tell apart from genuinely low risk.
fn score_features(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(x);
    out.extend(x.iter().map(|v| v * v));
}

const STREAM_SETUP: u64 = 0;
const STREAM_DRIFT: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_TIME: u64 = 16;

/// Runs the three update strategies against one simulated population.
///
/// All strategies see the same covariates and the same outcome noise at
/// every timepoint, so differences between their traces come only from
/// their scores.
pub fn simulate_dominance(config: &PopulationConfig) -> Result<DominanceTrace> {
    config.validate()?;
    let p = config.n_covariates();
    let v = config.n_visible;
    let pop = config.population_size;
    let timepoints = config.timepoints();

    let mut setup = substream(config.seed, STREAM_SETUP);
    let baseline: Vec<f64> = (0..p)
        .map(|j| match j {
            _ if j >= v => 0.8,
            0..STRONG_COVARIATES => STRONG_SLOPE,
            _ => rng::normal(&mut setup, 0.0, 0.2),
        })
        .collect();
    let drift = DriftProcess::sample(
        -2.0,
        &baseline,
        timepoints,
        config.timepoints_per_epoch as f64,
        config.drift_scale,
        &mut substream(config.seed, STREAM_DRIFT),
    )?;

    // initial score from an untreated sample at t = 0
    let learner = LogisticConfig::default();
    let initial = {
        let mut r = substream(config.seed, STREAM_INITIAL);
        let mut data = Dataset::new(2 * v);
        let mut x = vec![0.0; p];
        let mut f = Vec::with_capacity(2 * v);
        for _ in 0..pop {
            x.iter_mut().for_each(|c| *c = rng::std_normal(&mut r));
            let y = if r.random::<f64>() < drift.risk(0, &x) {
                1.0
            } else {
                0.0
            };
            score_features(&x[..v], &mut f);
            data.push(&f, y);
        }
        let rows: Vec<usize> = (0..pop).collect();
        LogisticModel::fit(&data, &rows, &learner)?
    };

    let strategies = [
        StrategyKind::NoUpdate,
        StrategyKind::NaiveUpdate,
        StrategyKind::HoldoutUpdate(config.holdout_size),
    ];
    let mut models = [initial.clone(), initial.clone(), initial];
    let mut trace = DominanceTrace::default();
    let mut x = vec![0.0; pop * p];
    let mut u = vec![0.0; pop];
    let mut treated_x = vec![0.0; p];
    let mut f = Vec::with_capacity(2 * v);
    for t in 0..timepoints {
        let mut r = substream(config.seed, STREAM_TIME + t as u64);
        x.iter_mut().for_each(|c| *c = rng::std_normal(&mut r));
        u.iter_mut().for_each(|c| *c = r.random::<f64>());
        let epoch_end = config.is_epoch_end(t);
        let mut in_holdout = vec![false; pop];
        if epoch_end {
            for i in rng::sample_indices(pop, config.holdout_size, &mut r) {
                in_holdout[i] = true;
            }
        }
        let slopes = drift.slopes(t);
        for (s, strategy) in strategies.iter().enumerate() {
            let holdout_active = epoch_end && matches!(strategy, StrategyKind::HoldoutUpdate(_));
            let eligible: Vec<bool> = if holdout_active {
                in_holdout.iter().map(|h| !h).collect()
            } else {
                vec![true; pop]
            };
            let scores: Vec<f64> = (0..pop)
                .map(|i| {
                    score_features(&x[i * p..i * p + v], &mut f);
                    models[s].linear_predictor(&f)
                })
                .collect();
            let treated = allocate_treatment(&scores, &eligible, config.treat_fraction);
            let mut cost = 0.0;
            let mut outcomes = Vec::with_capacity(pop);
            for i in 0..pop {
                treated_x.copy_from_slice(&x[i * p..(i + 1) * p]);
                if treated[i] {
                    apply_intervention(&mut treated_x, slopes, config.intervention_effect);
                }
                let risk = drift.risk(t, &treated_x);
                cost += risk;
                outcomes.push(if u[i] < risk { 1.0 } else { 0.0 });
            }
            let holdout_treated = if holdout_active {
                (0..pop).filter(|&i| in_holdout[i] && treated[i]).count()
            } else {
                0
            };
            trace.rows.push(TraceRow {
                t,
                strategy: *strategy,
                cost,
                treated: treated.iter().filter(|&&b| b).count(),
                holdout: if holdout_active { config.holdout_size } else { 0 },
                holdout_treated,
            });
            if epoch_end {
                let rows: Vec<usize> = match strategy {
                    StrategyKind::NoUpdate => continue,
                    StrategyKind::NaiveUpdate => (0..pop).collect(),
                    StrategyKind::HoldoutUpdate(_) => (0..pop).filter(|&i| in_holdout[i]).collect(),
                };
                let mut data = Dataset::new(2 * v);
                for &i in &rows {
                    score_features(&x[i * p..i * p + v], &mut f);
                    data.push(&f, outcomes[i]);
                }
                let all: Vec<usize> = (0..rows.len()).collect();
                models[s] = LogisticModel::fit(&data, &all, &learner)?;
            }
        }
    }
    Ok(trace)
}
