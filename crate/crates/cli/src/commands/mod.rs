mod assumptions;
mod emulate;
mod fit;
mod ohs;
mod simulate;

pub use assumptions::{run_assumptions, AssumptionsArgs};
pub use emulate::{run_emulate, EmulateArgs};
pub use fit::{run_fit, FitArgs};
pub use ohs::{run_ohs, OhsArgs};
pub use simulate::{run_simulate, SimulateArgs};

use crate::output::OutputDir;

/// Global settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub grid: usize,
    pub out: OutputDir,
}
