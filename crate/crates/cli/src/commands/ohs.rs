use super::Context;
use crate::error::CliResult;
use crate::formats::{csv_bytes, json_bytes, ohs_json, read_json, tabulated, CostFile};
use ohs_core::cost::{default_grid, evenly_spaced, find_ohs_grid, find_ohs_root, CostCurve};
use ohs_core::{BoundaryDiagnosis, Error};
use std::path::PathBuf;

/// Largest `N` searched exhaustively when there is no closed-form root.
const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

#[derive(Debug, clap::Args)]
pub struct OhsArgs {
    /// Cost parameters as JSON with keys N, k1, a, b, c and an optional bump.
    pub config: PathBuf,
    /// Tabulated k2 curve (CSV `n,k2`) used instead of the power law.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

pub fn run_ohs(args: &OhsArgs, ctx: &mut Context) -> CliResult<()> {
    let cost: CostFile = read_json(&ctx.out.input(&args.config)?)?;
    let table = match &args.curve {
        Some(path) => Some(tabulated(&ctx.out.input(path)?)?),
        None => None,
    };
    let model = cost.model(table)?;
    let last = model.last_size();

    let result = match &model.curve {
        CostCurve::PowerLaw(_) => find_ohs_root(&cost.params()?)?,
        curve => {
            if matches!(curve, CostCurve::DoubleDescent { theta, .. } if cost.k1 <= theta.c) {
                return Err(Error::NoInteriorOhs(BoundaryDiagnosis::ScoreNeverPaysOff).into());
            }
            let grid = if last <= EXHAUSTIVE_LIMIT {
                evenly_spaced(1, last, last as usize)
            } else {
                default_grid(cost.n_total, ctx.grid)
            };
            find_ohs_grid(&model, &grid)?
        }
    };
    let on_boundary = result.n_star == 1 || result.n_star == last;
    if on_boundary {
        log::warn!("optimum n = {} lies on the boundary of 1..={last}", result.n_star);
    }

    let grid = default_grid(cost.n_total, ctx.grid);
    let curve: Vec<(u64, f64)> = grid
        .iter()
        .map(|&n| Ok((n, model.total_cost(n as f64)?)))
        .collect::<ohs_core::Result<_>>()?;

    let mut summary = ohs_json(&result);
    summary["curve"] = model.curve.kind().into();
    summary["on_boundary"] = on_boundary.into();
    ctx.out.write("ohs.json", &json_bytes(&summary))?;
    ctx.out.write("cost_curve.csv", &csv_bytes(&["n", "cost"], curve))?;
    println!("n_star={} min_cost={}", result.n_star, result.min_cost);
    Ok(())
}
