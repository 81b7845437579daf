//! Experiment runner for the `fsl-sage-core` simulator: TOML run
//! configurations, a binary dataset format, per-run artifacts and grid
//! sweeps. The `fsl-sage` binary is a thin command line over this crate.

pub mod config_file;
pub mod dataset_file;
mod error;
pub mod output;
pub mod sweep;

use std::path::Path;

use fsl_sage_core::sim::{run_in, Environment};
use fsl_sage_core::{RunConfig, RunReport};

pub use error::{Error, Result};

/// Builds the run environment, loading `data.dataset_file` if set.
pub fn prepare_environment(config: &RunConfig) -> Result<Environment> {
    match &config.data.dataset_file {
        Some(path) => {
            let data = dataset_file::read_dataset(Path::new(path))?;
            Ok(Environment::with_dataset(config, data)?)
        }
        None => Ok(Environment::build(config)?),
    }
}

/// Runs `config` and writes its artifacts into `outdir`.
pub fn run_to_dir(config: &RunConfig, outdir: &Path, quiet: bool) -> Result<RunReport> {
    let env = prepare_environment(config)?;
    let report = run_in(&env, config)?;
    output::write_run(outdir, config, &report)?;
    if !quiet {
        for row in &report.rows {
            eprintln!(
                "[{}] round {:>4}  loss {:.4}  acc {:.4}  bytes {}",
                config.algorithm.name(),
                row.round,
                row.train_loss,
                row.eval_accuracy,
                row.cumulative_bytes
            );
        }
    }
    Ok(report)
}
