use super::Context;
use crate::error::{CliError, CliResult};
use crate::formats::{
    csv_bytes, emulation_trace_csv, interval_json, json_bytes, parametric_trace_csv, read_json, uncertainty_json,
};
use ohs_core::aspre::{
    generate_cohort, run_aspre_on_cohort, AspreAlgorithm, AspreOutcome, AspreParams, AspreSetup, AspreTrace, Measured,
};
use ohs_core::cost::{evenly_spaced, find_ohs_root};
use ohs_core::drift::{
    simulate_cost_structure, simulate_dominance, CostStructureConfig, PopulationConfig, StrategyKind,
};
use ohs_core::parametric::{fit_power_law, CostInputs, ObservationSet};
use ohs_core::rng::derive_seed;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    Dominance,
    CostStructure,
    Aspre,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Scenario settings as JSON; missing keys take desk-scale defaults.
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Scenario,
}

pub fn run_simulate(args: &SimulateArgs, ctx: &mut Context) -> CliResult<()> {
    let config: Value = match &args.config {
        Some(path) => read_json(&ctx.out.input(path)?)?,
        None => json!({}),
    };
    let bad = |e: serde_json::Error| CliError::input(args.config.clone().unwrap_or_default(), e);
    match args.scenario {
        Scenario::Dominance => dominance(serde_json::from_value(config).map_err(bad)?, ctx),
        Scenario::CostStructure => cost_structure(serde_json::from_value(config).map_err(bad)?, ctx),
        Scenario::Aspre => aspre(serde_json::from_value(config).map_err(bad)?, ctx),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DominanceFile {
    population_size: Option<usize>,
    n_visible: Option<usize>,
    n_latent: Option<usize>,
    timepoints_per_epoch: Option<usize>,
    epochs: Option<usize>,
    treat_fraction: Option<f64>,
    intervention_effect: Option<f64>,
    drift_scale: Option<f64>,
    holdout_size: Option<usize>,
}

fn dominance(file: DominanceFile, ctx: &mut Context) -> CliResult<()> {
    let d = PopulationConfig::desk_scale(ctx.seed);
    let config = PopulationConfig {
        population_size: file.population_size.unwrap_or(d.population_size),
        n_visible: file.n_visible.unwrap_or(d.n_visible),
        n_latent: file.n_latent.unwrap_or(d.n_latent),
        timepoints_per_epoch: file.timepoints_per_epoch.unwrap_or(d.timepoints_per_epoch),
        epochs: file.epochs.unwrap_or(d.epochs),
        treat_fraction: file.treat_fraction.unwrap_or(d.treat_fraction),
        intervention_effect: file.intervention_effect.unwrap_or(d.intervention_effect),
        drift_scale: file.drift_scale.unwrap_or(d.drift_scale),
        holdout_size: file.holdout_size.unwrap_or(d.holdout_size),
        seed: ctx.seed,
    };
    let trace = simulate_dominance(&config)?;
    let rows = trace.rows.iter().map(|r| (r.t, r.strategy.name(), r.cost));
    ctx.out
        .write("trace.csv", &csv_bytes(&["t", "strategy", "cost"], rows))?;

    // Scores first change at the end of the first epoch.
    let from = config.timepoints_per_epoch;
    let strategies = [
        StrategyKind::NoUpdate,
        StrategyKind::NaiveUpdate,
        StrategyKind::HoldoutUpdate(config.holdout_size),
    ];
    let means: serde_json::Map<String, Value> = strategies
        .iter()
        .map(|&s| (s.name().to_string(), trace.mean_cost_from(s, from).into()))
        .collect();
    let best = strategies
        .iter()
        .min_by(|a, b| {
            trace
                .mean_cost_from(**a, from)
                .total_cmp(&trace.mean_cost_from(**b, from))
        })
        .expect("three strategies");
    let summary = json!({
        "scenario": "dominance",
        "seed": ctx.seed,
        "population_size": config.population_size,
        "timepoints": config.timepoints(),
        "holdout_size": config.holdout_size,
        "mean_cost_after_first_update": means,
        "lowest": best.name(),
    });
    ctx.out.write("summary.json", &json_bytes(&summary))?;
    println!("lowest mean cost after first update: {}", best.name());
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostStructureFile {
    population_size: Option<usize>,
    n_covariates: Option<usize>,
    interactions: Option<bool>,
    learner_interactions: Option<bool>,
    treat_fraction: Option<f64>,
    grid: Option<Vec<u64>>,
    replicates: Option<usize>,
}

fn cost_structure(file: CostStructureFile, ctx: &mut Context) -> CliResult<()> {
    let d = CostStructureConfig::default();
    let config = CostStructureConfig {
        population_size: file.population_size.unwrap_or(d.population_size),
        n_covariates: file.n_covariates.unwrap_or(d.n_covariates),
        interactions: file.interactions.unwrap_or(d.interactions),
        learner_interactions: file.learner_interactions.unwrap_or(d.learner_interactions),
        treat_fraction: file.treat_fraction.unwrap_or(d.treat_fraction),
    };
    let grid = file
        .grid
        .unwrap_or_else(|| evenly_spaced(50, config.population_size as u64 / 2, 20));
    let replicates = file.replicates.unwrap_or(20);
    let est = simulate_cost_structure(&config, &grid, replicates, ctx.seed)?;
    let rows = (0..est.sizes.len()).map(|i| (est.sizes[i], est.k2_mean[i], est.k2_sd[i], est.replicates));
    ctx.out
        .write("curve.csv", &csv_bytes(&["n", "k2_mean", "k2_sd", "replicates"], rows))?;

    // A power-law fit to the simulated curve gives the implied optimum.
    let fitted = ObservationSet::new(est.sizes.clone(), est.k2_mean.clone(), est.k2_mean_variance())
        .and_then(|obs| fit_power_law(&obs, None))
        .and_then(|fit| {
            let params = CostInputs::known(est.k1, est.n_total).params(fit.theta)?;
            Ok((fit, find_ohs_root(&params)?))
        });
    let fit_json = match &fitted {
        Ok((fit, ohs)) => json!({
            "a": fit.theta.a,
            "b": fit.theta.b,
            "c": fit.theta.c,
            "n_star": ohs.n_star,
            "min_cost": ohs.min_cost,
        }),
        Err(e) => {
            log::warn!("no power-law optimum for the simulated curve: {e}");
            json!({ "error": e.to_string() })
        }
    };
    let summary = json!({
        "scenario": "cost-structure",
        "seed": ctx.seed,
        "k1": est.k1,
        "N": est.n_total,
        "replicates": est.replicates,
        "power_law": fit_json,
    });
    ctx.out.write("summary.json", &json_bytes(&summary))?;
    match fitted {
        Ok((_, ohs)) => println!("k1={} n_star={}", est.k1, ohs.n_star),
        Err(_) => println!("k1={}", est.k1),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct MeasuredFile {
    value: f64,
    se: f64,
}

impl From<MeasuredFile> for Measured {
    fn from(m: MeasuredFile) -> Self {
        Measured::new(m.value, m.se)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    n_total: MeasuredFile,
    pi: f64,
    pi0: MeasuredFile,
    pi1: MeasuredFile,
    alpha_aspirin: MeasuredFile,
    pi_pre: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum ParamsChoice {
    Preset(Preset),
    Explicit(ParamsFile),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Preset {
    Guideline,
    Rounded,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AlgoChoice {
    Parametric,
    Emulation,
    #[default]
    Both,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AspreFile {
    params: Option<ParamsChoice>,
    #[serde(default)]
    algo: AlgoChoice,
    cohort_size: Option<usize>,
    cohort_seed: Option<u64>,
    initial_points: Option<usize>,
    initial_range: Option<(u64, u64)>,
    sequential_points: Option<usize>,
    replicates: Option<usize>,
    parametric_candidates: Option<usize>,
    emulation_candidates: Option<usize>,
    mc_draws: Option<usize>,
    sigma_u2: Option<f64>,
    zeta: Option<f64>,
    ci_alpha: Option<f64>,
    error_set_alpha: Option<f64>,
    refresh_final: Option<bool>,
}

impl AspreFile {
    fn setup(&self, seed: u64) -> AspreSetup {
        let d = AspreSetup::new(self.cohort_seed.unwrap_or(seed), derive_seed(seed, 1));
        let params = match self.params {
            None | Some(ParamsChoice::Preset(Preset::Guideline)) => AspreParams::guideline(),
            Some(ParamsChoice::Preset(Preset::Rounded)) => AspreParams::rounded(),
            Some(ParamsChoice::Explicit(p)) => AspreParams {
                n_total: p.n_total.into(),
                pi: p.pi,
                pi0: p.pi0.into(),
                pi1: p.pi1.into(),
                alpha_aspirin: p.alpha_aspirin.into(),
                pi_pre: p.pi_pre,
            },
        };
        AspreSetup {
            params,
            cohort_size: self.cohort_size.unwrap_or(d.cohort_size),
            initial_points: self.initial_points.unwrap_or(d.initial_points),
            initial_range: self.initial_range.unwrap_or(d.initial_range),
            sequential_points: self.sequential_points.unwrap_or(d.sequential_points),
            replicates: self.replicates.unwrap_or(d.replicates),
            parametric_candidates: self.parametric_candidates.unwrap_or(d.parametric_candidates),
            emulation_candidates: self.emulation_candidates.unwrap_or(d.emulation_candidates),
            mc_draws: self.mc_draws.unwrap_or(d.mc_draws),
            sigma_u2: self.sigma_u2.unwrap_or(d.sigma_u2),
            zeta: self.zeta.unwrap_or(d.zeta),
            ci_alpha: self.ci_alpha.unwrap_or(d.ci_alpha),
            error_set_alpha: self.error_set_alpha.unwrap_or(d.error_set_alpha),
            refresh_final: self.refresh_final.unwrap_or(d.refresh_final),
            ..d
        }
    }
}

fn aspre(file: AspreFile, ctx: &mut Context) -> CliResult<()> {
    let setup = file.setup(ctx.seed);
    setup.validate()?;
    let algorithms: &[AspreAlgorithm] = match file.algo {
        AlgoChoice::Parametric => &[AspreAlgorithm::Parametric],
        AlgoChoice::Emulation => &[AspreAlgorithm::Emulation],
        AlgoChoice::Both => &[AspreAlgorithm::Parametric, AspreAlgorithm::Emulation],
    };
    let cohort = generate_cohort(setup.cohort_size, setup.cohort_seed)?;
    for &algo in algorithms {
        let outcome = run_aspre_on_cohort(&cohort, &setup, algo)?;
        write_aspre(&outcome, ctx)?;
        println!("{algo}: ohs={} cost={}", outcome.result.n_star, outcome.result.min_cost);
    }
    Ok(())
}

fn write_aspre(o: &AspreOutcome, ctx: &mut Context) -> CliResult<()> {
    let name = o.algorithm.name();
    let summary = json!({
        "algo": name,
        "ohs": o.result.n_star,
        "cost": o.result.min_cost,
        "ci_or_error_set": uncertainty_json(&o.result.uncertainty),
        "cost_ci": o.cost_interval.as_ref().map(interval_json),
        "k1": { "value": o.k1.value, "se": o.k1.se },
        "N": o.n_total,
        "evaluations": o.design.len(),
        "seeds": { "cohort": o.cohort_seed, "algorithm": o.seed },
    });
    ctx.out.write(&format!("summary_{name}.json"), &json_bytes(&summary))?;
    let trace = match &o.trace {
        AspreTrace::Parametric(steps) => parametric_trace_csv(steps),
        AspreTrace::Emulation(steps) => emulation_trace_csv(steps),
    };
    ctx.out.write(&format!("trace_{name}.csv"), &trace)
}
