//! Power-law fitting, delta-method and bootstrap intervals for the optimal
//! holdout size, and greedy sequential design.

mod algorithm;
mod ci;
mod fit;
mod gradient;
mod observations;

pub use algorithm::{
    default_candidates, next_point_parametric, run_parametric_algorithm, NextPoint, ParametricConfig,
    ParametricOutcome, ParametricStep, DEFAULT_CANDIDATES, DEFAULT_MC_DRAWS,
};
pub use ci::{asymptotic_ci, asymptotic_ci_with_covariance, bootstrap_ci, BootstrapCi, CostInputs};
pub use fit::{fit_power_law, refit_power_law, FitWarning, ResidualReport, ThetaFit, B_MAX};
pub use gradient::{mincost_gradient, mincost_gradient_at, ohs_gradient, ohs_gradient_at, GradientVector};
pub use observations::ObservationSet;
