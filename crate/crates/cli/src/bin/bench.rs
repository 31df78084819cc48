use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kfdr_cli::{cmd_generate, ExperimentConfig, Run};

/// Benchmark oscillator datasets.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the oscillator on an LHS design; writes inputs.csv + responses.csv
    Generate {
        /// duffing | boucwen
        #[arg(long, default_value = "duffing")]
        model: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// additive Gaussian output noise std
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Generate { model, n, seed, noise, out } = Cli::parse().command;
    let mut config = ExperimentConfig::default();
    config.data.model = model;
    config.data.n = n;
    config.data.noise = noise;
    match cmd_generate(&Run::new(config, Some(seed), Some(out))) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
