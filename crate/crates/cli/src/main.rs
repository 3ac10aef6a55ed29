mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::DataFormat;
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Closed-form analysis and training runs for beta-VAEs with exponential
/// dispersion family decoders.
///
/// Outputs go to the configured `output_dir`; relative directories are
/// placed under `$GLMVAE_OUTPUT_ROOT` when it is set.
#[derive(Debug, Parser)]
#[command(name = "glmvae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML experiment file.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form MLE: writes mle.csv, mle.bin and lhat.txt.
    Mle(ConfigArgs),
    /// Trains one network per seed: history_seed<N>.csv, aggregate.csv and
    /// optionally curves.svg.
    Train(ConfigArgs),
    /// Analytical versus trained activities for every beta in `betas`.
    Activity(ConfigArgs),
    /// Writes the synthetic Bernoulli data set.
    Synth {
        #[arg(short, long, default_value_t = 10_000)]
        n: usize,
        #[arg(short, long, default_value_t = 200)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DataFormat::Idx)]
        format: DataFormat,
    },
    /// Writes initialized model checkpoints, one per seed.
    InitExport(ConfigArgs),
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::Mle(a) => commands::cmd_mle(&a.load()?),
        Command::Train(a) => commands::cmd_train(&a.load()?),
        Command::Activity(a) => commands::cmd_activity(&a.load()?),
        Command::InitExport(a) => commands::cmd_init_export(&a.load()?),
        Command::Synth { n, d, seed, out, format } => commands::cmd_synth(n, d, seed, &out, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(dir) => {
            log::info!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
