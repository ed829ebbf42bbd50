//! Worked example: sizing the holdout set for a pre-eclampsia risk score
//! that decides who is offered aspirin.
//!
//! Costs are expected PRE cases. Baseline care costs `k1` per individual;
//! an individual served by a score trained on `n` samples costs
//! `k2(n) = pi_pre - pi pi1(n) (1 - alpha)`, where `pi1(n)` is the PRE rate
//! among the fraction `pi` the score flags. The learning curve `pi1(n)` is
//! measured on a synthetic cohort.

mod cohort;
mod params;
mod pipeline;

pub use cohort::{
    generate_cohort, learning_curve_sensitivity, LearningCurvePoint, SyntheticCohort, COVARIATES, MIN_COHORT,
    PREVALENCE, TOP_DECILE_RISK,
};
pub use params::{
    baseline_cost_k1, fit_mse_map, k2_from_mse, k2_from_sensitivity, pi0_from_sensitivity, AspreParams, Measured,
    MseCostMap,
};
pub use pipeline::*;
