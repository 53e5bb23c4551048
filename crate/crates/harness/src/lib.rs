//! Monte Carlo experiments for the `dfsmc-core` direction finders:
//! JSON configuration, a parallel trial driver, and CSV/JSON reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, GridConfig, Method, Overrides, ScenarioConfig, Sweep, SweepAxis};
pub use experiment::{
    run_experiment, run_experiment_with, trial_seed, ExperimentError, ExperimentOutput, MethodSummary, Setup,
    SweepReport, TrialOutcome, TrialReport,
};
pub use report::{render_table, write_outputs};
