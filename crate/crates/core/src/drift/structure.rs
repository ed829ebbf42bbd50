use super::population::allocate_treatment;
use crate::error::{Error, Result};
use crate::learner::{Dataset, LogisticConfig, LogisticModel};
use crate::math::{logistic, mean, sample_variance};
use crate::rng::{self, substream};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Cost of flagging a sample, whatever its outcome.
pub const COST_FLAGGED: f64 = 0.5;
/// Cost of a missed positive. True negatives cost nothing.
pub const COST_FALSE_NEGATIVE: f64 = 1.0;

/// A logistic ground truth over standard normal covariates, scored by a
/// logistic learner trained on increasing numbers of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CostStructureConfig {
    pub population_size: usize,
    pub n_covariates: usize,
    /// Ground truth includes products of adjacent covariate pairs.
    pub interactions: bool,
    /// Learner is given the same product features as the ground truth.
    pub learner_interactions: bool,
    /// Fraction of the intervention set flagged, highest scores first.
    pub treat_fraction: f64,
}

impl Default for CostStructureConfig {
    fn default() -> Self {
        Self {
            population_size: 5_000,
            n_covariates: 7,
            interactions: false,
            learner_interactions: false,
            treat_fraction: 0.2,
        }
    }
}

impl CostStructureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.n_covariates < 1 {
            return Err(Error::domain("need at least 2 samples and 1 covariate"));
        }
        if !(self.treat_fraction > 0.0 && self.treat_fraction < 1.0) {
            return Err(Error::domain("treat fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    fn slopes(&self) -> Vec<f64> {
        const BASE: [f64; 7] = [0.8, -0.6, 0.5, 0.4, -0.3, 0.2, 0.1];
        (0..self.n_covariates)
            .map(|j| BASE[j % BASE.len()] / (1 + j / BASE.len()) as f64)
            .collect()
    }

    fn true_logit(&self, x: &[f64], slopes: &[f64]) -> f64 {
        let mut eta = -1.0 + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        if self.interactions {
            eta += pair_products(x).map(|v| 0.8 * v).sum::<f64>();
        }
        eta
    }

    fn features(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        if self.learner_interactions {
            out.extend(pair_products(x));
        }
    }

    fn n_features(&self) -> usize {
        self.n_covariates
            + if self.learner_interactions {
                self.n_covariates / 2
            } else {
                0
            }
    }
}

fn pair_products(x: &[f64]) -> impl Iterator<Item = f64> + '_ {
    x.chunks_exact(2).map(|c| c[0] * c[1])
}

/// Per-size summary of the simulated per-sample cost `k2` and total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCurveEstimate {
    pub sizes: Vec<u64>,
    pub k2_mean: Vec<f64>,
    pub k2_sd: Vec<f64>,
    pub cost_mean: Vec<f64>,
    pub cost_sd: Vec<f64>,
    pub replicates: usize,
    /// Expected per-sample cost with no score, where nobody is flagged.
    pub k1: f64,
    pub n_total: f64,
}

impl CostCurveEstimate {
    /// Variance of each `k2_mean` entry.
    pub fn k2_mean_variance(&self) -> Vec<f64> {
        self.k2_sd.iter().map(|s| s * s / self.replicates as f64).collect()
    }
}

/// Estimates `k2(n)` on `holdout_grid` by training the learner on `n`
/// samples and pricing its flags on an independent evaluation cohort of the
/// population size.
///
/// Costs are expected costs under the true risk, so a flagged sample costs
/// [`COST_FLAGGED`] and an unflagged one costs its risk times
/// [`COST_FALSE_NEGATIVE`]. Within a replicate the training sets are nested
/// and the evaluation cohort is shared, so successive sizes differ only by
/// the added training samples.
pub fn simulate_cost_structure(
    config: &CostStructureConfig,
    holdout_grid: &[u64],
    replicates: usize,
    seed: u64,
) -> Result<CostCurveEstimate> {
    config.validate()?;
    let big_n = config.population_size;
    if holdout_grid.is_empty() || holdout_grid.iter().any(|&n| n < 1 || n as usize >= big_n) {
        return Err(Error::domain("holdout sizes must lie in 1..population_size"));
    }
    if replicates < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: replicates,
        });
    }
    let mut grid = holdout_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let max_n = *grid.last().expect("nonempty") as usize;
    let slopes = config.slopes();
    let p = config.n_covariates;
    let learner = LogisticConfig::default();

    let mut k2 = vec![Vec::with_capacity(replicates); grid.len()];
    let mut k1_reps = Vec::with_capacity(replicates);
    let mut x = vec![0.0; p];
    let mut feats = Vec::new();
    for rep in 0..replicates {
        let mut r = substream(seed, rep as u64);
        let mut train = Dataset::new(config.n_features());
        for _ in 0..max_n {
            x.iter_mut().for_each(|v| *v = rng::std_normal(&mut r));
            let risk = logistic(config.true_logit(&x, &slopes));
            let y = if r.random::<f64>() < risk { 1.0 } else { 0.0 };
            config.features(&x, &mut feats);
            train.push(&feats, y);
        }
        let mut eval_x = Vec::with_capacity(big_n * config.n_features());
        let mut eval_risk = Vec::with_capacity(big_n);
        for _ in 0..big_n {
            x.iter_mut().for_each(|v| *v = rng::std_normal(&mut r));
            eval_risk.push(logistic(config.true_logit(&x, &slopes)));
            config.features(&x, &mut feats);
            eval_x.extend_from_slice(&feats);
        }
        k1_reps.push(COST_FALSE_NEGATIVE * mean(&eval_risk));
        let eligible = vec![true; big_n];
        let nf = config.n_features();
        for (g, &n) in grid.iter().enumerate() {
            let rows: Vec<usize> = (0..n as usize).collect();
            let model = LogisticModel::fit(&train, &rows, &learner)?;
            let scores: Vec<f64> = (0..big_n)
                .map(|i| model.linear_predictor(&eval_x[i * nf..(i + 1) * nf]))
                .collect();
            let flagged = allocate_treatment(&scores, &eligible, config.treat_fraction);
            k2[g].push(expected_cost(&flagged, &eval_risk));
        }
    }
    let k1 = mean(&k1_reps);
    let nt = big_n as f64;
    let mut out = CostCurveEstimate {
        sizes: grid.clone(),
        k2_mean: Vec::with_capacity(grid.len()),
        k2_sd: Vec::with_capacity(grid.len()),
        cost_mean: Vec::with_capacity(grid.len()),
        cost_sd: Vec::with_capacity(grid.len()),
        replicates,
        k1,
        n_total: nt,
    };
    for (g, &n) in grid.iter().enumerate() {
        let n = n as f64;
        let costs: Vec<f64> = k2[g]
            .iter()
            .zip(&k1_reps)
            .map(|(k, k1r)| k1r * n + k * (nt - n))
            .collect();
        out.k2_mean.push(mean(&k2[g]));
        out.k2_sd.push(libm::sqrt(sample_variance(&k2[g])));
        out.cost_mean.push(mean(&costs));
        out.cost_sd.push(libm::sqrt(sample_variance(&costs)));
    }
    Ok(out)
}

/// Mean expected cost per sample of a flagging decision.
pub fn expected_cost(flagged: &[bool], risk: &[f64]) -> f64 {
    let total: f64 = flagged
        .iter()
        .zip(risk)
        .map(|(&f, &p)| if f { COST_FLAGGED } else { COST_FALSE_NEGATIVE * p })
        .sum();
    total / risk.len() as f64
}

/// Mean realised cost per sample from the confusion-matrix cells.
pub fn realised_cost(flagged: &[bool], outcome: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&f, &y) in flagged.iter().zip(outcome) {
        match (f, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    (COST_FLAGGED * (tp + fp) as f64 + COST_FALSE_NEGATIVE * fn_ as f64) / flagged.len() as f64
}
