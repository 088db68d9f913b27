//! `commgcn`: run experiments, generate synthetic graphs, inspect datasets.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use commgcn::graph::{load_dataset_dir, write_dataset_dir};
use commgcn::harness::experiment::DatasetStats;
use commgcn::harness::{run_experiment, synth_sbm, ExperimentConfig, Overrides, SbmSpec};
use commgcn::SamplingMode;

#[derive(Parser)]
#[command(
    name = "commgcn",
    version,
    about = "Simulated distributed GCN training with skewed neighbor sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (mode, D) cell of an experiment config.
    Run {
        config: PathBuf,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated modes: full, local, skewed.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<SamplingMode>>,
        /// Comma-separated skew constants for skewed mode.
        #[arg(long = "d-values", value_delimiter = ',')]
        d_values: Option<Vec<f64>>,
    },
    /// Generate a stochastic block model dataset directory from a TOML spec.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print statistics of a dataset directory as JSON.
    Inspect { dir: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            modes,
            d_values,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.apply(&Overrides {
                seed,
                out_dir: out,
                modes,
                d_values,
            })?;
            let report = run_experiment(&cfg)?;
            println!(
                "{:<8} {:>6} {:>12} {:>9} {:>9}",
                "mode", "D", "comm", "best_val", "reduction"
            );
            for c in &report.summary.cells {
                println!(
                    "{:<8} {:>6} {:>12} {:>9} {:>9}",
                    c.mode.as_str(),
                    c.d.map_or("-".into(), |d| d.to_string()),
                    c.total_comm,
                    c.best_val_acc.map_or("-".into(), |a| format!("{a:.4}")),
                    c.reduction_vs_full
                        .map_or("-".into(), |r| format!("{r:.3}x")),
                );
            }
            println!("results written to {}", cfg.out_dir.display());
        }
        Command::Synth { spec, out, seed } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let mut sbm: SbmSpec =
                toml::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            if let Some(seed) = seed {
                sbm.seed = seed;
            }
            let g = synth_sbm(&sbm)?;
            write_dataset_dir(&g, &out)?;
            println!(
                "wrote {} nodes, {} edges to {}",
                g.n_nodes(),
                g.edges().count(),
                out.display()
            );
        }
        Command::Inspect { dir } => {
            let g = load_dataset_dir(&dir)?;
            println!("{}", serde_json::to_string_pretty(&DatasetStats::of(&g))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
