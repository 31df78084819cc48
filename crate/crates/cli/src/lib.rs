//! Commands behind the `kfdr` and `bench` binaries.
//!
//! Seeds: the master seed fans out to named streams, `data` (dataset
//! generation), `fit` (Kriging starts), `study`, `forward`, `observations`
//! (synthetic inverse data), `init` (walker starts) and `mcmc`.

pub mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use kfdr::bench::generate_dataset;
use kfdr::io;
use kfdr::model::{PinnedModel, ResponseModel};
use kfdr::study::{median_nrmse, run_study};
use kfdr::surrogate::{fit_surrogate, LatentSurrogate, Reducer};
use kfdr::uq::{
    ensemble_mcmc, forward_uq, forward_uq_model, noisy_observation, posterior_summary, Calibration, NoisePrior, ParameterSummary,
};
use kfdr::{RandomSource, ResponseEnsemble};

pub use config::ExperimentConfig;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "out";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "fit_report.json";
pub const STUDY_FILE: &str = "study.csv";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const PREDICTION_STD_FILE: &str = "prediction_std.csv";
pub const EXCITATION_FILE: &str = "excitation.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kfdr::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("report: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;

/// Resolved run context: config plus flag overrides.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
        let out = out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Self { config, seed, out }
    }

    pub fn from_files(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Self> {
        let config = match config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        Ok(Self::new(config, seed, out))
    }

    fn rng(&self, label: &str) -> RandomSource {
        RandomSource::new(self.seed).derive(label)
    }

    fn model_path(&self) -> PathBuf {
        self.config.surrogate.model.clone().unwrap_or_else(|| self.out.join(MODEL_FILE))
    }
}

/// Writes `inputs.csv`, `responses.csv` (and `excitation.csv` when the
/// excitation does not depend on the inputs).
pub fn cmd_generate(run: &Run) -> CliResult<ResponseEnsemble> {
    let bench = run.config.benchmark()?;
    let data = generate_dataset(&bench, run.config.data.n, &mut run.rng("data"), run.config.data.noise)?;
    io::write_ensemble(&run.out, &data)?;
    if let Some(table) = bench.excitation_table() {
        let rows: Vec<Vec<String>> = table.iter().map(|&(t, f)| vec![io::fmt_f64(t), io::fmt_f64(f)]).collect();
        io::write_table(&run.out.join(EXCITATION_FILE), &["t", "force_per_sqrt_mass"], &rows)?;
    }
    println!("wrote {} {} samples to {}", data.len(), bench.name(), run.out.display());
    Ok(data)
}

fn load_or_generate(run: &Run) -> CliResult<ResponseEnsemble> {
    let d = &run.config.data;
    match (&d.inputs, &d.responses) {
        (Some(x), Some(y)) => Ok(io::read_ensemble(x, y)?),
        (None, None) => {
            let bench = run.config.benchmark()?;
            Ok(generate_dataset(&bench, d.n, &mut run.rng("data"), d.noise)?)
        }
        _ => Err(CliError::Config("data.inputs and data.responses must be given together".into())),
    }
}

#[derive(Debug, Serialize)]
pub struct ScoreReport {
    pub theta: Vec<f64>,
    pub sigma_z2: f64,
    pub sigma_n2: f64,
    pub mean: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub reducer: String,
    pub n_train: usize,
    pub n_b: Option<usize>,
    pub tau: Option<f64>,
    pub m: usize,
    pub variance_fraction: f64,
    pub eigenvalues: Vec<f64>,
    pub scores: Vec<ScoreReport>,
}

impl FitReport {
    pub fn new(s: &LatentSurrogate) -> Self {
        let (n_b, tau) = match &s.reducer {
            Reducer::Functional(r) => (Some(r.basis().len()), Some(r.tau())),
            Reducer::Pca(_) => (None, None),
        };
        let scores = s
            .models
            .iter()
            .map(|k| {
                let h = k.hyperparameters();
                ScoreReport {
                    theta: h.theta.clone(),
                    sigma_z2: h.sigma_z2,
                    sigma_n2: h.sigma_n2,
                    mean: k.mean_level(),
                    log_likelihood: k.log_likelihood(),
                }
            })
            .collect();
        Self {
            reducer: s.kind.name().into(),
            n_train: s.n_train,
            n_b,
            tau,
            m: s.m(),
            variance_fraction: s.reducer.variance_fraction(),
            eigenvalues: s.reducer.eigenvalues().to_vec(),
            scores,
        }
    }
}

/// Fits a surrogate; writes the model file and a JSON fit report. Timing
/// is printed, not stored, so reports are reproducible.
pub fn cmd_fit(run: &Run) -> CliResult<LatentSurrogate> {
    let data = load_or_generate(run)?;
    let start = Instant::now();
    let s = fit_surrogate(&data, &run.config.surrogate_config(), &mut run.rng("fit"))?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = FitReport::new(&s);
    io::save_surrogate(&run.model_path(), &s)?;
    io::write_atomic(&run.out.join(REPORT_FILE), serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!(
        "{}: n_train={} n_b={} tau={} m={} retained={:.4} fit_time={elapsed:.2}s",
        report.reducer,
        report.n_train,
        report.n_b.map_or("-".into(), |v| v.to_string()),
        report.tau.map_or("-".into(), |v| format!("{v:.3e}")),
        report.m,
        report.variance_fraction
    );
    Ok(s)
}

/// Mean and std curves at the rows of `predict.inputs`.
pub fn cmd_predict(run: &Run) -> CliResult<()> {
    let s = io::load_surrogate(&run.model_path())?;
    let path = run.config.predict.inputs.clone().ok_or_else(|| CliError::Config("predict.inputs is required".into()))?;
    let (names, x) = io::read_inputs(&path)?;
    if names != s.input_names {
        return Err(CliError::Config(format!(
            "{}: columns [{}] do not match model inputs [{}]",
            path.display(),
            names.join(", "),
            s.input_names.join(", ")
        )));
    }
    let times: Vec<String> = s.grid().nodes().into_iter().map(io::fmt_f64).collect();
    let mut means = vec![times.clone()];
    let mut stds = vec![times];
    for i in 0..x.nrows() {
        let p = s.predict_curve(&x.row(i).iter().copied().collect::<Vec<_>>())?;
        means.push(p.mean.iter().map(|&v| io::fmt_f64(v)).collect());
        stds.push(p.variance.iter().map(|&v| io::fmt_f64(v.sqrt())).collect());
    }
    io::write_table(&run.out.join(PREDICTIONS_FILE), &[], &means)?;
    io::write_table(&run.out.join(PREDICTION_STD_FILE), &[], &stds)?;
    println!("predicted {} curves", means.len() - 1);
    Ok(())
}

/// Error-vs-training-size table on a generated benchmark.
pub fn cmd_study(run: &Run) -> CliResult<()> {
    let bench = run.config.benchmark()?;
    let cfg = run.config.study_config();
    let rows = run_study(&bench, &run.config.surrogate_config(), &cfg, &run.rng("study"))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.method.name().to_string(), r.n_train.to_string(), r.repetition.to_string(), io::fmt_f64(r.nrmse)])
        .collect();
    io::write_table(&run.out.join(STUDY_FILE), &["method", "n_train", "repetition", "nrmse"], &table)?;
    for &n in &cfg.n_train {
        for &m in &cfg.methods {
            println!("{} n_train={n} median_nrmse={:.4e}", m.name(), median_nrmse(&rows, m, n));
        }
    }
    Ok(())
}

/// `mean_std.csv` and `extremes_kde.csv` through the model file or the
/// benchmark simulator (`forward.exact`).
pub fn cmd_forward(run: &Run) -> CliResult<()> {
    let bench = run.config.benchmark()?;
    let dist = run.config.forward_distribution(&bench)?;
    let n = run.config.forward.n_mcs;
    let mut rng = run.rng("forward");
    let result = if run.config.forward.exact {
        forward_uq_model(bench.as_model(), &bench.grid(), &dist, n, &mut rng)?
    } else {
        let s = io::load_surrogate(&run.model_path())?;
        if s.input_names != bench.input_names() {
            return Err(CliError::Config(format!(
                "model inputs [{}] do not match data.model '{}'",
                s.input_names.join(", "),
                bench.name()
            )));
        }
        forward_uq(&s, &dist, n, &mut rng)?
    };
    io::write_forward(&run.out, &result)?;
    let peak = result.std.iter().copied().fold(0.0, f64::max);
    println!("forward: n_mcs={n} max_std={peak:.4e}");
    Ok(())
}

/// Posterior draws and summary for the free inputs (and σ).
pub fn cmd_inverse(run: &Run) -> CliResult<Vec<ParameterSummary>> {
    let bench = run.config.benchmark()?;
    let inv = &run.config.inverse;
    let surrogate = if inv.exact { None } else { Some(io::load_surrogate(&run.model_path())?) };
    let full: &dyn ResponseModel = match &surrogate {
        Some(s) => s,
        None => bench.as_model(),
    };
    let grid = bench.grid();
    let noise = inv.noise.unwrap_or_else(|| bench.inverse_noise());
    let observations = match &inv.observations {
        Some(p) => {
            let (g, obs) = io::read_observations(p)?;
            if g.len() != grid.len() || (g.te() - grid.te()).abs() > 1e-9 * grid.te().abs().max(1.0) {
                return Err(CliError::Config(format!("{}: time nodes do not match the {} grid", p.display(), bench.name())));
            }
            obs
        }
        None => {
            if inv.n_obs == 0 {
                return Err(CliError::Config("inverse.n_obs must be at least 1".into()));
            }
            let truth = inv.truth.clone().unwrap_or_else(|| bench.inverse_truth());
            let clean = bench.as_model().evaluate(&truth)?;
            let mut rng = run.rng("observations");
            let rows = (0..inv.n_obs).map(|_| noisy_observation(&clean, noise, &mut rng)).collect::<Result<Vec<_>, _>>()?;
            let obs = DMatrix::from_fn(rows.len(), grid.len(), |i, j| rows[i][j]);
            io::write_observations(&run.out.join(OBSERVATIONS_FILE), &grid, &obs)?;
            obs
        }
    };
    let pinned = run.config.pinned(&bench)?;
    let model = PinnedModel::new(full, pinned.clone())?;
    let prior = run.config.priors(&bench, &pinned)?;
    let sigma = inv.sigma.unwrap_or(NoisePrior::Uniform { lower: 0.1 * noise, upper: 10.0 * noise });
    let cal = Calibration::new(&model, prior, sigma, observations)?;
    let settings = run.config.mcmc_settings();
    let init = cal.sample_prior(settings.walkers, &mut run.rng("init"));
    let samples = ensemble_mcmc(|th: &[f64]| cal.log_posterior(th), &init, &settings, &mut run.rng("mcmc"))?;
    let names: Vec<String> =
        bench.input_names().into_iter().zip(&pinned).filter(|(_, p)| p.is_none()).map(|(n, _)| n).collect();
    let names = cal.parameter_names(&names);
    let summary = posterior_summary(&samples.draws, &names)?;
    io::write_posterior(&run.out, &names, &samples, &summary)?;
    println!("acceptance rate: {:.3}", samples.acceptance_rate);
    for p in &summary {
        println!("{:>8}  mean {:.5e}  95% [{:.5e}, {:.5e}]", p.variable, p.mean, p.q025, p.q975);
    }
    Ok(summary)
}
