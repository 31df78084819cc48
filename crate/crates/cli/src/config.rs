//! Experiment configuration (TOML). Every section and key is optional;
//! command-line flags override `seed` and `out`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use kfdr::basis::BasisKind;
use kfdr::bench::Benchmark;
use kfdr::fpca::DEFAULT_VARIANCE_FRACTION;
use kfdr::kriging::KrigingConfig;
use kfdr::smoothing::GcvCount;
use kfdr::study::{StudyConfig, StudyMethod};
use kfdr::surrogate::{ReducerKind, SurrogateConfig};
use kfdr::uq::{InputDistribution, Marginal, McmcSettings, NoisePrior, DEFAULT_N_MCS};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: DataSection,
    pub basis: BasisSection,
    pub smoothing: SmoothingSection,
    pub fpca: FpcaSection,
    pub kriging: KrigingSection,
    pub surrogate: SurrogateSection,
    pub study: StudySection,
    pub forward: ForwardSection,
    pub inverse: InverseSection,
    pub predict: PredictSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// benchmark generator: `duffing` or `boucwen`
    pub model: String,
    pub n: usize,
    pub noise: f64,
    /// existing dataset instead of generating one
    pub inputs: Option<PathBuf>,
    pub responses: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { model: "duffing".into(), n: 100, noise: 0.0, inputs: None, responses: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    /// overrides the kind implied by `surrogate.reducer`
    pub kind: Option<BasisKind>,
    pub n_b0: Option<usize>,
    pub order: Option<usize>,
    /// fixed basis count (skips the basis-count search)
    pub n_b: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub n_tau: Option<usize>,
    pub delta_r: Option<f64>,
    pub n_b0: Option<usize>,
    pub tau_override: Option<f64>,
    pub gcv_count: Option<GcvCount>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpcaSection {
    pub variance_fraction: f64,
    pub mirror: Option<bool>,
}

impl Default for FpcaSection {
    fn default() -> Self {
        Self { variance_fraction: DEFAULT_VARIANCE_FRACTION, mirror: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrigingSection {
    pub n_starts: usize,
    pub budget: usize,
    pub fix_nugget: Option<f64>,
}

impl Default for KrigingSection {
    fn default() -> Self {
        let d = KrigingConfig::default();
        Self { n_starts: d.n_starts, budget: d.budget, fix_nugget: d.fix_nugget }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub reducer: ReducerKind,
    /// model file; defaults to `<out>/model.json`
    pub model: Option<PathBuf>,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self { reducer: ReducerKind::KfdrB, model: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub n_train: Vec<usize>,
    pub repetitions: usize,
    pub n_test: usize,
    pub noise: f64,
    pub methods: Vec<StudyMethod>,
}

impl Default for StudySection {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self { n_train: d.n_train, repetitions: d.repetitions, n_test: d.n_test, noise: d.noise_std, methods: d.methods }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardSection {
    pub n_mcs: usize,
    /// propagate through the benchmark simulator instead of the model file
    pub exact: bool,
    /// per-input marginals by name; missing inputs use the benchmark table
    pub distributions: BTreeMap<String, Marginal>,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self { n_mcs: DEFAULT_N_MCS, exact: false, distributions: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    /// observation CSV; when absent observations are synthesized
    pub observations: Option<PathBuf>,
    pub truth: Option<Vec<f64>>,
    pub n_obs: usize,
    pub noise: Option<f64>,
    pub sigma: Option<NoisePrior>,
    /// inputs held fixed by name
    pub fixed: Option<BTreeMap<String, f64>>,
    /// per-input priors by name; default uniform on the benchmark bounds
    pub priors: BTreeMap<String, Marginal>,
    pub exact: bool,
    pub walkers: usize,
    pub iterations: usize,
    pub burn_in: f64,
}

impl Default for InverseSection {
    fn default() -> Self {
        let m = McmcSettings::default();
        Self {
            observations: None,
            truth: None,
            n_obs: 3,
            noise: None,
            sigma: None,
            fixed: None,
            priors: BTreeMap::new(),
            exact: false,
            walkers: m.walkers,
            iterations: m.iterations,
            burn_in: m.burn_in,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// CSV of input rows with a header of input names
    pub inputs: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn benchmark(&self) -> Result<Benchmark, CliError> {
        Ok(Benchmark::by_name(&self.data.model)?)
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        let mut c = SurrogateConfig::new(self.surrogate.reducer);
        if let Some(kind) = self.basis.kind {
            c.fpca = kfdr::fpca::ReducerConfig::new(kind);
        }
        let s = &mut c.fpca.smoothing;
        if let Some(v) = self.basis.n_b0.or(self.smoothing.n_b0) {
            s.n_b0 = v;
        }
        if let Some(v) = self.basis.order {
            s.order = v;
        }
        if let Some(v) = self.smoothing.n_tau {
            s.n_tau = v;
        }
        if let Some(v) = self.smoothing.delta_r {
            s.delta_r = v;
        }
        if let Some(v) = self.smoothing.gcv_count {
            s.gcv_count = v;
        }
        s.tau_override = self.smoothing.tau_override;
        c.fpca.n_b = self.basis.n_b;
        c.fpca.variance_fraction = self.fpca.variance_fraction;
        if let Some(m) = self.fpca.mirror {
            c.fpca.mirror = m;
        }
        c.kriging = KrigingConfig { n_starts: self.kriging.n_starts, budget: self.kriging.budget, fix_nugget: self.kriging.fix_nugget };
        c
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            n_train: self.study.n_train.clone(),
            repetitions: self.study.repetitions,
            n_test: self.study.n_test,
            noise_std: self.study.noise,
            methods: self.study.methods.clone(),
        }
    }

    /// Benchmark table with per-name overrides.
    pub fn forward_distribution(&self, bench: &Benchmark) -> Result<InputDistribution, CliError> {
        let names = bench.input_names();
        check_names(&names, self.forward.distributions.keys(), "forward.distributions")?;
        let table = bench.forward_distribution();
        let m = names
            .iter()
            .zip(table.marginals)
            .map(|(n, d)| self.forward.distributions.get(n).copied().unwrap_or(d))
            .collect();
        Ok(InputDistribution::new(m)?)
    }

    pub fn mcmc_settings(&self) -> McmcSettings {
        McmcSettings { walkers: self.inverse.walkers, iterations: self.inverse.iterations, burn_in: self.inverse.burn_in, ..McmcSettings::default() }
    }

    /// Pinned values per input (benchmark default unless `inverse.fixed` is given).
    pub fn pinned(&self, bench: &Benchmark) -> Result<Vec<Option<f64>>, CliError> {
        let names = bench.input_names();
        match &self.inverse.fixed {
            None => Ok(bench.inverse_pinned()),
            Some(map) => {
                check_names(&names, map.keys(), "inverse.fixed")?;
                Ok(names.iter().map(|n| map.get(n).copied()).collect())
            }
        }
    }

    /// Priors for the free inputs, in input order.
    pub fn priors(&self, bench: &Benchmark, pinned: &[Option<f64>]) -> Result<InputDistribution, CliError> {
        let names = bench.input_names();
        check_names(&names, self.inverse.priors.keys(), "inverse.priors")?;
        let m = names
            .iter()
            .zip(bench.bounds())
            .zip(pinned)
            .filter(|(_, p)| p.is_none())
            .map(|((n, (lo, hi)), _)| self.inverse.priors.get(n).copied().unwrap_or(Marginal::Uniform { lower: lo, upper: hi }))
            .collect();
        Ok(InputDistribution::new(m)?)
    }
}

fn check_names<'a>(names: &[String], keys: impl Iterator<Item = &'a String>, section: &str) -> Result<(), CliError> {
    for k in keys {
        if !names.contains(k) {
            return Err(CliError::Config(format!("{section}: unknown input '{k}' (model inputs: {})", names.join(", "))));
        }
    }
    Ok(())
}
