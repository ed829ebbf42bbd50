//! Cost oracles backed by an external command.
//!
//! The command is run through `sh -c` with the holdout size appended as its
//! last argument. It must print `value,variance` on the first line of
//! stdout. `OHS_SEED` carries a per-call seed derived from the run seed.

use ohs_core::oracle::{CostOracle, Estimate};
use ohs_core::rng::derive_seed;
use ohs_core::Error;
use std::process::Command;

pub struct CommandOracle {
    command: String,
    seed: u64,
    calls: u64,
}

impl CommandOracle {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Self {
            command: command.into(),
            seed,
            calls: 0,
        }
    }
}

impl CostOracle for CommandOracle {
    fn estimate(&mut self, n: u64) -> ohs_core::Result<Estimate> {
        let fail = |message: String| Error::Oracle { n, message };
        let call_seed = derive_seed(self.seed, self.calls);
        self.calls += 1;
        let output = Command::new("sh")
            .arg("-c")
            .arg(format!("{} {n}", self.command))
            .env("OHS_SEED", call_seed.to_string())
            .output()
            .map_err(|e| fail(format!("cannot run `{}`: {e}", self.command)))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(fail(format!(
                "`{}` exited with {}: {}",
                self.command,
                output.status,
                stderr.trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let line = stdout.lines().next().unwrap_or("");
        let estimate = parse_estimate(line).map_err(fail)?;
        log::debug!("oracle n={n} value={} variance={}", estimate.value, estimate.variance);
        Ok(estimate)
    }
}

fn parse_estimate(line: &str) -> Result<Estimate, String> {
    let mut parts = line.split(',').map(str::trim);
    let (Some(v), Some(s), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected `value,variance`, got `{line}`"));
    };
    let value: f64 = v.parse().map_err(|_| format!("bad value `{v}`"))?;
    let variance: f64 = s.parse().map_err(|_| format!("bad variance `{s}`"))?;
    if !value.is_finite() || !(variance > 0.0) || !variance.is_finite() {
        return Err(format!("need a finite value and positive variance, got `{line}`"));
    }
    Ok(Estimate { value, variance })
}
