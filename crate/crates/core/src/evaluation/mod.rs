//! Evaluation protocols, noise mixing, parameter search and metrics.

mod grid;
mod metrics;
mod protocol;

pub use grid::{
    bootstrap_grid_search, default_grid, grid_search, tuned_parameter, GridRow, GridTable, ELASTICITY_GRID, GAMMA_GRID,
};
pub use metrics::{accuracy, f1_score, one_vs_rest, plain_accuracy, ConfusionMatrix};
pub use protocol::{
    bootstrap_subset, calibrate_no_tv_threshold, mix_noise, plan_scenarios, run_protocol, scale_load, EvalConfig,
    EvalCorpus, EvalReport, NoiseScenario, Protocol, ScenarioResult, DEFAULT_SCENARIOS, DEFAULT_WINDOW,
    FULL_SCALE_WINDOW,
};
