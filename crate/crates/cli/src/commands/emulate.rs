use super::Context;
use crate::error::CliResult;
use crate::formats::{
    csv_bytes, emulation_trace_csv, json_bytes, observations_csv, ohs_json, read_json, read_observations, GpFile,
};
use crate::oracle::CommandOracle;
use ohs_core::cost::default_grid;
use ohs_core::emulator::{Emulation, EmulationConfig};
use ohs_core::rng::derive_seed;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct EmulateArgs {
    /// Total-cost observations as CSV `n,value,variance`.
    pub observations: PathBuf,
    /// Emulator prior as JSON with keys a, b, c, k1, N, sigma_u2, zeta, tau, alpha.
    pub gp: PathBuf,
    /// Overrides the stopping threshold on expected improvement.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "max-iter", default_value_t = 50)]
    pub max_iter: usize,
    /// Command printing `value,variance` for the total cost at the size passed as its last argument.
    #[arg(long = "oracle-cmd")]
    pub oracle_cmd: Option<String>,
}

pub fn run_emulate(args: &EmulateArgs, ctx: &mut Context) -> CliResult<()> {
    let obs = read_observations(&ctx.out.input(&args.observations)?)?;
    let gp_file: GpFile = read_json(&ctx.out.input(&args.gp)?)?;
    let mut gp = gp_file.config()?;
    if let Some(tau) = args.tau {
        gp.tau = tau;
        gp.validate()?;
    }
    let mut config = EmulationConfig::new(gp, args.max_iter);
    config.candidates = default_grid(gp.prior_n, ctx.grid);
    let mut state = Emulation::from_observations(config, obs)?;
    let mut oracle = args
        .oracle_cmd
        .as_ref()
        .map(|cmd| CommandOracle::new(cmd.clone(), derive_seed(ctx.seed, 1)));

    let mut trace = Vec::new();
    let stop = loop {
        if state.iterations() >= args.max_iter {
            break "max_iter";
        }
        let (n, ei) = state.best_acquisition()?;
        if !(ei > gp.tau) {
            break "tau";
        }
        let Some(oracle) = oracle.as_mut() else {
            log::warn!("expected improvement {ei} at n = {n} exceeds tau but no --oracle-cmd was given");
            break "no_oracle";
        };
        let step = state.acquire(oracle, n, ei)?;
        log::info!(
            "iteration {}: acquired n = {n}, n_star = {}",
            step.iteration,
            step.n_star
        );
        trace.push(step);
    };

    let result = state.result();
    let posterior = state.posterior();
    let mu_curve = state.candidates().iter().map(|&n| {
        let (mu, psi) = posterior.mu_psi(n as f64);
        (n, mu, psi)
    });
    let mut summary = ohs_json(&result);
    summary["stopped"] = stop.into();
    summary["iterations"] = state.iterations().into();
    let prior = state.current_prior().prior_theta;
    summary["prior"] = serde_json::json!({ "a": prior.a, "b": prior.b, "c": prior.c });

    ctx.out.write("ohs.json", &json_bytes(&summary))?;
    ctx.out.write("trace.csv", &emulation_trace_csv(&trace))?;
    ctx.out
        .write("mu_curve.csv", &csv_bytes(&["n", "mu", "psi"], mu_curve))?;
    ctx.out
        .write("observations.csv", &observations_csv(state.observations()))?;
    println!(
        "n_star={} min_cost={} acquisitions={} stopped={stop}",
        result.n_star,
        result.min_cost,
        trace.len()
    );
    Ok(())
}
