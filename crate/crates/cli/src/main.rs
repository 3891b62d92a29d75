use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genex_cli::commands::{cmd_generate, cmd_inspect_pool, cmd_run, cmd_simulate_optimism, cmd_split, with_out};
use genex_cli::report::cmd_report;
use genex_cli::{CliError, RunConfig};
use genex_core::synthetic::ShiftedSpec;
use genex_core::voaware::OptimismSimConfig;

#[derive(Parser)]
#[command(name = "genex", version, about = "Validation-overfitting-aware model generation and ensembling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the train/test split and write its index files.
    Split {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured method for every seed and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run this seed only.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Keep finished seeds and persisted generation pools.
        #[arg(long)]
        resume: bool,
    },
    /// Summarise every report under a directory and write plot series.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo estimate of the optimism of the best of N×q noisy scores.
    SimulateOptimism {
        /// TOML file with the simulation settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        checkpoints: Option<usize>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// List the models of a pool checkpoint or an ensemble directory.
    InspectPool { path: PathBuf },
    /// Write the synthetic shifted benchmark and a starter config.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = ShiftedSpec::default().n_per_class)]
        n_per_class: usize,
        #[arg(long, default_value_t = ShiftedSpec::default().dim)]
        dim: usize,
    },
}

fn optimism_config(path: Option<PathBuf>) -> Result<OptimismSimConfig, CliError> {
    let Some(path) = path else {
        return Ok(OptimismSimConfig::default());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}

fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Split { config, out } => cmd_split(&with_out(RunConfig::from_file(&config)?, out, None)),
        Command::Run {
            config,
            out,
            seed_override,
            resume,
        } => cmd_run(&with_out(RunConfig::from_file(&config)?, out, seed_override), resume),
        Command::Report { out } => cmd_report(&out),
        Command::SimulateOptimism {
            config,
            runs,
            checkpoints,
            noise_scale,
            trials,
            seed_override,
        } => {
            let mut c = optimism_config(config)?;
            c.runs = runs.unwrap_or(c.runs);
            c.checkpoints = checkpoints.unwrap_or(c.checkpoints);
            c.noise_scale = noise_scale.unwrap_or(c.noise_scale);
            c.trials = trials.unwrap_or(c.trials);
            c.seed = seed_override.unwrap_or(c.seed);
            cmd_simulate_optimism(&c)
        }
        Command::InspectPool { path } => cmd_inspect_pool(&path),
        Command::Generate {
            out,
            seed,
            n_per_class,
            dim,
        } => cmd_generate(
            &out,
            &ShiftedSpec {
                n_per_class,
                dim,
                ..ShiftedSpec::default()
            },
            seed,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("genex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
