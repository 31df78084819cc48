use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kfdr_cli::{cmd_fit, cmd_forward, cmd_generate, cmd_inverse, cmd_predict, cmd_study, CliResult, Run};

/// Kriging surrogates of time-variant responses via functional dimension
/// reduction, with forward and inverse UQ.
#[derive(Parser)]
#[command(name = "kfdr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// master seed (overrides `seed` in the config)
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML experiment config
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset (inputs.csv, responses.csv)
    Generate {
        #[command(flatten)]
        common: Common,
        /// duffing | boucwen
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// additive Gaussian output noise std
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit a surrogate and write the model file and fit report
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Predict mean and std curves for the inputs in `predict.inputs`
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// Test-error study across methods, training sizes and repetitions
    Study {
        #[command(flatten)]
        common: Common,
    },
    /// Forward UQ by Monte Carlo
    Forward {
        #[command(flatten)]
        common: Common,
    },
    /// Bayesian calibration with the ensemble sampler
    Inverse {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = |c: &Common| Run::from_files(c.config.as_deref(), c.seed, c.out.clone());
    match cli.command {
        Command::Generate { common, model, n, noise } => {
            let mut r = ctx(&common)?;
            if let Some(m) = model {
                r.config.data.model = m;
            }
            if let Some(n) = n {
                r.config.data.n = n;
            }
            if let Some(s) = noise {
                r.config.data.noise = s;
            }
            cmd_generate(&r).map(|_| ())
        }
        Command::Fit { common } => cmd_fit(&ctx(&common)?).map(|_| ()),
        Command::Predict { common } => cmd_predict(&ctx(&common)?),
        Command::Study { common } => cmd_study(&ctx(&common)?),
        Command::Forward { common } => cmd_forward(&ctx(&common)?),
        Command::Inverse { common } => cmd_inverse(&ctx(&common)?).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
