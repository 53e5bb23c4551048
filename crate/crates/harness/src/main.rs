use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Context;
use clap::Parser;
use dfsmc_harness::{render_table, run_experiment_with, write_outputs, ExperimentConfig, Method, Overrides};

/// Monte Carlo direction-finding experiments under unknown mutual coupling.
#[derive(Parser, Debug)]
#[command(name = "dfsmc", version)]
struct Cli {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated methods: dfsmc, sbl_on_grid, sbl_off_grid, music.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; trial p uses seed XOR p.
    #[arg(long)]
    seed: Option<u64>,
    /// SNR in dB; several comma-separated values run an SNR sweep.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Coupling strength in dB; several values run a coupling sweep.
    #[arg(long = "coupling-db", value_delimiter = ',', allow_hyphen_values = true)]
    coupling_db: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply(&Overrides {
        methods: cli.method,
        trials: cli.trials,
        seed: cli.seed,
        snr_db: cli.snr,
        coupling_alpha_db: cli.coupling_db,
        output_dir: cli.out,
        workers: cli.workers,
    })?;
    if cli.print_config {
        println!("{}", config.to_json_pretty());
        return Ok(());
    }

    let total = config.sweep_points().len() * config.trials;
    let done = AtomicUsize::new(0);
    let output = run_experiment_with(&config, |_| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!("trial {n}/{total} done");
    })?;
    let dir = config.output_dir.clone();
    let written = write_outputs(&output, &dir).with_context(|| format!("writing results to {}", dir.display()))?;
    print!("{}", render_table(&output.sweep));
    println!("{} files written to {}", written.len(), dir.display());
    Ok(())
}
