//! Command-line entry point. Exit codes: 0 on success, 2 on configuration
//! errors (bad file, bad flags, invalid values), 1 on runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fewkg::checkpoint::{inspect_checkpoint, load_checkpoint, CheckpointError};
use fewkg::config::{load_config, ConfigError, ExperimentConfig, Overrides};
use fewkg::experiment::{evaluate_checkpoint, run_experiment, sweep_k, RunError};
use fewkg::io::{write_dataset, IoError};
use fewkg_core::data::generate_synthetic_dataset;

/// Output root fallback when --out is not given.
const RUNS_DIR_VAR: &str = "FEWKG_RUNS_DIR";

#[derive(Parser)]
#[command(name = "fewkg", version, about = "Few-shot knowledge graph completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Run a single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Support set size at meta-test time.
    #[arg(long)]
    k_shot: Option<usize>,
    /// Disable trait reweighting in the encoder.
    #[arg(long)]
    no_trait: bool,
    /// Disable the triplet CVAE (losses and augmentation).
    #[arg(long)]
    no_tcvae: bool,
    /// Drop other known-true tails from ranking candidates.
    #[arg(long)]
    filtered: bool,
}

impl CommonOverrides {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            k_shot: self.k_shot,
            no_trait: self.no_trait,
            no_tcvae: self.no_tcvae,
            filtered: self.filtered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the config's synthetic dataset to TSV/JSON files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Directory to write entities/relations/triplets/splits into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Meta-train every seed and evaluate on the test relations.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output root (default: $FEWKG_RUNS_DIR or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Evaluate a saved checkpoint on the test relations without training.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Train once per seed, then evaluate across augmentation counts K.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        /// K values to sweep.
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,8,16,32")]
        ks: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Print parameter names, shapes, and L2 norms of a checkpoint.
    Inspect { checkpoint: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) | AppError::Run(RunError::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(RUNS_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load_with_overrides(
    path: &Path,
    overrides: &CommonOverrides,
) -> Result<ExperimentConfig, AppError> {
    let mut config = load_config(path)?;
    config.apply_overrides(&overrides.to_overrides());
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Synth { config, out } => {
            let config = load_config(&config)?;
            let spec = config.dataset.synthetic.as_ref().ok_or_else(|| {
                ConfigError::Invalid("synth requires dataset.synthetic in the config".into())
            })?;
            let (dataset, files) = generate_synthetic_dataset(spec).map_err(IoError::Data)?;
            write_dataset(&out, &files)?;
            println!(
                "wrote {} entities, {} relations, {} triplets to {}",
                dataset.n_entities(),
                dataset.n_relations(),
                dataset.triplets().count(),
                out.display()
            );
        }
        Command::Train { config, out, overrides } => {
            let config = load_with_overrides(&config, &overrides)?;
            let root = out_root(out);
            let report = run_experiment(&config, &root)?;
            for s in &report.per_seed {
                println!(
                    "seed {}: best epoch {} (val MRR {:.4}), test MRR {:.4}",
                    s.seed, s.best_epoch, s.best_val_mrr, s.test.mrr
                );
            }
            println!(
                "mean test MRR {:.4} (std {:.4}) over {} seeds, {:.1}s",
                report.aggregate.mrr_mean,
                report.aggregate.mrr_std,
                report.per_seed.len(),
                report.wall_clock_secs
            );
            println!("report: {}", root.join(&config.name).join("report.json").display());
        }
        Command::Eval { config, checkpoint, overrides } => {
            let config = load_with_overrides(&config, &overrides)?;
            let params = load_checkpoint(&checkpoint)?;
            let outcomes = evaluate_checkpoint(&params, &config)?;
            let text = serde_json::to_string_pretty(&outcomes)
                .expect("metric reports are plain data");
            println!("{text}");
        }
        Command::SweepK { config, ks, out, overrides } => {
            let config = load_with_overrides(&config, &overrides)?;
            let root = out_root(out);
            let report = sweep_k(&config, &ks, &root)?;
            for p in &report.points {
                println!("K={:<3} mean test MRR {:.4} (std {:.4})", p.n_generated, p.mrr_mean, p.mrr_std);
            }
            println!("report: {}", root.join(&config.name).join("sweep.json").display());
        }
        Command::Inspect { checkpoint } => {
            let summaries = inspect_checkpoint(&checkpoint)?;
            let scalars: usize = summaries.iter().map(|s| s.dims.iter().product::<usize>()).sum();
            for s in &summaries {
                let dims = s.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
                println!("{:<24} {:>12} {:>14.6}", s.name, dims, s.l2_norm);
            }
            println!("{} parameters, {} scalars", summaries.len(), scalars);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
