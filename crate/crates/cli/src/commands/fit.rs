use super::Context;
use crate::error::{CliError, CliResult};
use crate::formats::{
    interval_json, json_bytes, observations_csv, ohs_json, parametric_trace_csv, read_observations, theta_fit_json,
};
use crate::oracle::CommandOracle;
use ohs_core::cost::{find_ohs_root, stationary_point};
use ohs_core::math::mean;
use ohs_core::oracle::CostOracle;
use ohs_core::parametric::{
    asymptotic_ci, bootstrap_ci, default_candidates, fit_power_law, next_point_parametric, refit_power_law, CostInputs,
    ParametricStep, ThetaFit, DEFAULT_MC_DRAWS,
};
use ohs_core::rng::derive_seed;
use ohs_core::{Method, Uncertainty};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Observations of k2 as CSV `n,value,variance`.
    pub observations: PathBuf,
    /// Per-sample cost without a score.
    #[arg(long)]
    pub k1: f64,
    /// Total number of samples the score will serve.
    #[arg(long = "n-total")]
    pub n_total: f64,
    #[arg(long = "k1-se", default_value_t = 0.0)]
    pub k1_se: f64,
    #[arg(long = "n-total-se", default_value_t = 0.0)]
    pub n_total_se: f64,
    /// Intervals have nominal coverage 1 - alpha.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Parametric bootstrap replicates; zero skips the bootstrap.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    /// Greedy acquisitions to make through `--oracle-cmd` before the final fit.
    #[arg(long = "next-points", default_value_t = 0)]
    pub next_points: usize,
    /// Command printing `value,variance` for k2 at the size passed as its last argument.
    #[arg(long = "oracle-cmd")]
    pub oracle_cmd: Option<String>,
    /// Monte Carlo draws per candidate when choosing the next point.
    #[arg(long = "mc-draws", default_value_t = DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,
}

fn refit(obs: &ohs_core::parametric::ObservationSet, previous: Option<&ThetaFit>) -> ohs_core::Result<ThetaFit> {
    match previous.map(|f| refit_power_law(obs, &f.theta)) {
        Some(Ok(f)) => Ok(f),
        _ => fit_power_law(obs, previous.map(|f| f.theta)),
    }
}

pub fn run_fit(args: &FitArgs, ctx: &mut Context) -> CliResult<()> {
    let mut obs = read_observations(&ctx.out.input(&args.observations)?)?;
    let inputs = CostInputs {
        k1: args.k1,
        k1_se: args.k1_se,
        n_total: args.n_total,
        n_total_se: args.n_total_se,
    };
    let mut oracle = match (&args.oracle_cmd, args.next_points) {
        (_, 0) => None,
        (Some(cmd), _) => Some(CommandOracle::new(cmd.clone(), derive_seed(ctx.seed, 1))),
        (None, _) => return Err(CliError::Usage("--next-points needs --oracle-cmd".into())),
    };

    let mut fit = fit_power_law(&obs, None)?;
    let mut trace = Vec::with_capacity(args.next_points);
    if let Some(oracle) = oracle.as_mut() {
        let candidates = default_candidates(args.n_total);
        for it in 0..args.next_points {
            let n_hat = inputs.params(fit.theta).ok().and_then(|p| stationary_point(&p).ok());
            let pick = next_point_parametric(
                &obs,
                &fit,
                &inputs,
                &candidates,
                mean(obs.variances()),
                args.mc_draws,
                args.alpha,
                derive_seed(ctx.seed, it as u64 + 2),
            )?;
            let e = oracle.estimate(pick.n)?;
            obs.push(pick.n, e.value, e.variance)?;
            log::info!("acquired n = {} (k2 = {})", pick.n, e.value);
            trace.push(ParametricStep {
                iteration: it,
                n_acquired: pick.n,
                value: e.value,
                variance: e.variance,
                random: pick.expected_width.is_none(),
                expected_width: pick.expected_width,
                n_hat,
            });
            fit = refit(&obs, Some(&fit))?;
        }
    }

    let params = inputs.params(fit.theta)?;
    let mut result = find_ohs_root(&params)?;
    let (ci_n, ci_cost) = asymptotic_ci(&fit, &inputs, args.alpha)?;
    result.method = Method::Parametric;
    result.uncertainty = Some(Uncertainty::Interval(ci_n));

    let mut summary = ohs_json(&result);
    summary["n_hat"] = stationary_point(&params)?.into();
    summary["cost_ci"] = interval_json(&ci_cost);
    if args.bootstrap > 0 {
        let boot = bootstrap_ci(&obs, &inputs, args.alpha, args.bootstrap, derive_seed(ctx.seed, 0))?;
        summary["bootstrap"] = json!({
            "ci": interval_json(&boot.interval),
            "replicates": boot.replicates,
            "degenerate": boot.degenerate,
        });
    }

    let fit_json = theta_fit_json(&fit, args.k1, args.n_total, &inputs.covariance(&fit));
    ctx.out.write("fit.json", &json_bytes(&fit_json))?;
    ctx.out.write("ohs.json", &json_bytes(&summary))?;
    if oracle.is_some() {
        ctx.out.write("observations.csv", &observations_csv(&obs))?;
        ctx.out.write("trace.csv", &parametric_trace_csv(&trace))?;
    }
    println!(
        "n_star={} min_cost={} ci=[{}, {}]",
        result.n_star, result.min_cost, ci_n.lower, ci_n.upper
    );
    Ok(())
}
