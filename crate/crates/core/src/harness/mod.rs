//! Monte-Carlo experiments: TOML configuration, parallel execution with
//! resumable CSV checkpoints, and summary statistics.

mod config;
mod results;
mod run;
mod summary;

pub use config::{Algo, ExperimentConfig};
pub use results::{
    channel_hash, read_results, read_results_file, sort_rows, write_results, write_results_file, CellKey,
    Diagnostics, ResultRow, RESULTS_HEADER,
};
pub use run::{first_rs_subproblem, run_experiment, trial_channels, ExperimentReport, RunOptions};
pub use summary::{summarize, AlgoDof, CellStats, Summary};
