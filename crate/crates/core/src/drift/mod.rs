//! Populations under drift and score-guided intervention: when refitting on
//! a holdout set beats the alternatives, and where an optimal holdout size
//! emerges from an ordinary learner.

mod bounds;
mod population;
mod structure;

pub use bounds::{dominance_delta_bounds, DeltaBounds, DominanceBoundInputs};
pub use population::{
    allocate_treatment, apply_intervention, simulate_dominance, DominanceTrace, DriftProcess, PopulationConfig,
    StrategyKind, TraceRow,
};
pub use structure::{
    expected_cost, realised_cost, simulate_cost_structure, CostCurveEstimate, CostStructureConfig, COST_FALSE_NEGATIVE,
    COST_FLAGGED,
};
