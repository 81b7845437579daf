use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fsl_sage::config_file::{load_config, override_seeds};
use fsl_sage::dataset_file::write_dataset;
use fsl_sage::run_to_dir;
use fsl_sage::sweep::{load_sweep, run_sweep};
use fsl_sage_core::data::gen_gaussian_mixture;

/// Federated split learning simulator.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Replace every seed in the configuration with this one.
    #[arg(long, global = true, value_name = "SEED")]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration; writes metrics.csv, summary.json and config.toml.
    Run { config: PathBuf, outdir: PathBuf },
    /// Run a parameter grid; one sub-directory per point plus comparison.csv.
    Sweep {
        config: PathBuf,
        sweepspec: PathBuf,
        outdir: PathBuf,
    },
    /// Write the configuration's generated dataset to a binary file.
    GenData { config: PathBuf, out: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let load = |path: &PathBuf| -> anyhow::Result<_> {
        let mut config = load_config(path)?;
        if let Some(seed) = cli.seed_override {
            override_seeds(&mut config, seed);
        }
        Ok(config)
    };
    match &cli.command {
        Command::Run { config, outdir } => {
            let config = load(config)?;
            let report = run_to_dir(&config, outdir, cli.quiet)?;
            if !cli.quiet {
                eprintln!(
                    "done: {} rounds, best accuracy {:.4}, {} bytes",
                    report.rows.len(),
                    report.best_accuracy().unwrap_or(f64::NAN),
                    report.ledger.total_bytes()
                );
            }
        }
        Command::Sweep {
            config,
            sweepspec,
            outdir,
        } => {
            let config = load(config)?;
            let spec = load_sweep(sweepspec)?;
            let results = run_sweep(&config, &spec, outdir, cli.quiet)?;
            if !cli.quiet {
                eprintln!("done: {} grid points in {}", results.len(), outdir.display());
            }
        }
        Command::GenData { config, out } => {
            let config = load(config)?;
            let d = &config.data;
            let data = gen_gaussian_mixture(
                d.samples + d.eval_samples,
                d.features,
                d.classes,
                d.separation,
                config.seeds.dataset,
            )
            .context("generating dataset")?;
            write_dataset(out, &data)?;
        }
    }
    Ok(())
}
