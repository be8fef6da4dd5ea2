//! Experiment harness for `score-forge-core`: JSON configs, experiment
//! runners, and CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod parallel;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{run_experiment, ExperimentResult};

/// Output directory: the explicit one, else the config's, else `results/<experiment>`.
pub fn output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(cfg.experiment.name()))
}

/// Runs `cfg` on a pool of `threads` workers and writes its outputs to `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path, threads: usize) -> Result<ExperimentResult, HarnessError> {
    let result = parallel::with_pool(threads, || run_experiment(cfg, &parallel::Rayon))??;
    output::write_outputs(&result, dir)?;
    Ok(result)
}
