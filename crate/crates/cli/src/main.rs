//! `fiberleak`: simulate DAS recordings of the pipe testbed, extract feature
//! cubes, train and evaluate the CNN detector and quantify detected leaks.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fiberleak::config::ExperimentConfig;
use fiberleak::Error;

#[derive(Parser, Debug)]
#[command(name = "fiberleak", version, about = "Leak detection and quantification from distributed acoustic sensing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Configuration file overriding the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replace a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the testbed cases into DASR recordings.
    Simulate {
        /// Case numbers or ids, comma-separated (e.g. `1,9` or `case01`).
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        /// Seconds per case.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Turn recordings into labelled DASF feature cubes.
    Featurize {
        /// Directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        z: Option<usize>,
    },
    /// Train a detector on the training windows of every case.
    Train {
        /// Directory written by `featurize`.
        #[arg(long)]
        input: PathBuf,
        /// `2d` or `3d`.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        z: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the test windows and write probability maps and metrics.
    Evaluate {
        /// Directory written by `featurize`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Estimate leak size from probability maps.
    Quantify {
        /// Directory written by `evaluate`.
        #[arg(long)]
        input: PathBuf,
        /// Use a stored range model instead of fitting one.
        #[arg(long)]
        range_model: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config {
        /// Print the built-in defaults, ignoring --config.
        #[arg(long)]
        print_defaults: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numerical(_) => 4,
        Error::Domain(_) | Error::Shape(_) | Error::Format { .. } | Error::Io { .. } => 3,
    }
}

fn load_config(global: &GlobalArgs) -> fiberleak::Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.run.seed = seed;
    }
    if let Some(threads) = global.threads {
        cfg.run.threads = threads;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> fiberleak::Result<()> {
    if let Command::Config { print_defaults } = cli.command {
        let cfg = if print_defaults { ExperimentConfig::default() } else { load_config(&cli.global)? };
        print!("{}", cfg.to_ini());
        return Ok(());
    }
    let cfg = load_config(&cli.global)?;
    if cfg.run.threads > 0 {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global();
    }
    commands::dispatch(cli, cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
