//! Scenarios, Monte Carlo experiments, CSV output and figure recipes.

pub mod csv;
pub mod experiment;
pub mod recipes;
pub mod scenario;

pub use csv::{emit_csv, fmt_float, frames_csv, summary_csv, sweep_csv, Timing};
pub use experiment::{
    generate_realizations, generate_realizations_with, mean_std, run_experiment, run_experiment_with, ExperimentResult, FrameRow,
    PolicyKind, PolicyResult, RunOptions,
};
pub use recipes::{reproduce, Figure, RecipeOptions};
pub use scenario::{load_scenario, DischargeModel, OnlineConfig, Scenario};
