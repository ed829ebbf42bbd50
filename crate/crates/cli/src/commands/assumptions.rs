use super::Context;
use crate::error::CliResult;
use crate::formats::{json_bytes, read_curve};
use ohs_core::cost::check_assumptions;
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct AssumptionsArgs {
    /// Sampled k2 curve as CSV `n,k2`.
    pub curve: PathBuf,
    #[arg(long)]
    pub k1: f64,
    #[arg(long = "n-total")]
    pub n_total: f64,
}

pub fn run_assumptions(args: &AssumptionsArgs, ctx: &mut Context) -> CliResult<()> {
    let rows = read_curve(&ctx.out.input(&args.curve)?)?;
    let sizes: Vec<f64> = rows.iter().map(|r| r.n).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.k2).collect();
    let r = check_assumptions(&sizes, &values, args.k1, args.n_total)?;
    let report = json!({
        "all_hold": r.all_hold(),
        "a1": { "holds": r.a1_holds },
        "a2": {
            "holds": r.a2_holds,
            "violations": r.a2_violations,
            "first_violation": r.a2_first_violation.map(|i| r.sizes[i]),
        },
        "a3": { "holds": r.a3_holds, "crossing_m": r.crossing_m },
        "a4": {
            "holds": r.a4_holds,
            "violations": r.a4_violations,
            "first_violation": r.a4_first_violation.map(|i| r.sizes[i]),
        },
        "a5": { "holds": r.a5_holds, "best_m": r.a5_best_m, "margin": r.a5_margin },
        "sizes": r.sizes.len(),
    });
    ctx.out.write("assumptions.json", &json_bytes(&report))?;
    println!(
        "a2={} a3={} a4={} a5={}",
        r.a2_holds, r.a3_holds, r.a4_holds, r.a5_holds
    );
    Ok(())
}
