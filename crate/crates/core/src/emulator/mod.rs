//! Gaussian-process emulation of the total cost with a parametric prior
//! mean, expected-improvement acquisition and error sets.

mod algorithm;
mod coalesce;
mod posterior;

pub use algorithm::{run_emulation_algorithm, Emulation, EmulationConfig, EmulationOutcome, EmulationStep};
pub use coalesce::{coalesce, coalesce_summed_precision, coalesce_with, CoalesceRule, CoalescedObservations};
pub use posterior::{
    argmin_mu, ei_formula, error_set, expected_improvement, next_point_ei, posterior, posterior_with_nugget,
    EmulatorPosterior, GpConfig, Nugget, NuggetSpec, JITTER_LEVELS,
};
