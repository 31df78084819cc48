//! Test-error study: several surrogate methods fitted on shared training
//! sets, scored on one fixed test set.

use serde::{Deserialize, Serialize};

use crate::bench::{generate_dataset, Benchmark};
use crate::error::{invalid, Result};
use crate::rng::RandomSource;
use crate::surrogate::{fit_surrogate, ReducerKind, SurrogateConfig};

/// A surrogate variant in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMethod {
    KfdrF,
    KfdrB,
    Pca,
    /// B-spline reduction with τ pinned to 0
    KfdrBNoreg,
}

impl StudyMethod {
    pub const ALL: [StudyMethod; 4] = [StudyMethod::KfdrF, StudyMethod::KfdrB, StudyMethod::Pca, StudyMethod::KfdrBNoreg];

    pub fn name(self) -> &'static str {
        match self {
            StudyMethod::KfdrF => "kfdr-f",
            StudyMethod::KfdrB => "kfdr-b",
            StudyMethod::Pca => "pca",
            StudyMethod::KfdrBNoreg => "kfdr-b-noreg",
        }
    }

    /// Surrogate settings derived from a shared base configuration.
    pub fn config(self, base: &SurrogateConfig) -> SurrogateConfig {
        let with = |kind: ReducerKind| {
            let mut c = SurrogateConfig::new(kind);
            c.kriging = base.kriging;
            c.fpca.variance_fraction = base.fpca.variance_fraction;
            c.fpca.smoothing.n_tau = base.fpca.smoothing.n_tau;
            c.fpca.smoothing.delta_r = base.fpca.smoothing.delta_r;
            c.fpca.smoothing.gcv_count = base.fpca.smoothing.gcv_count;
            c
        };
        match self {
            StudyMethod::KfdrF => with(ReducerKind::KfdrF),
            StudyMethod::KfdrB => with(ReducerKind::KfdrB),
            StudyMethod::Pca => with(ReducerKind::Pca),
            StudyMethod::KfdrBNoreg => {
                let mut c = with(ReducerKind::KfdrB);
                c.fpca.smoothing.tau_override = Some(0.0);
                c
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_train: Vec<usize>,
    pub repetitions: usize,
    pub n_test: usize,
    /// additive Gaussian noise on training curves only
    pub noise_std: f64,
    pub methods: Vec<StudyMethod>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_train: vec![100],
            repetitions: 10,
            n_test: 1000,
            noise_std: 0.0,
            methods: vec![StudyMethod::KfdrF, StudyMethod::KfdrB, StudyMethod::Pca],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: StudyMethod,
    pub n_train: usize,
    pub repetition: usize,
    pub nrmse: f64,
}

/// Streams: `test` for the test set, `train/<n>/<rep>` for each training
/// set (shared by all methods), `fit/<method>/<n>/<rep>` for each fit.
pub fn run_study(bench: &Benchmark, base: &SurrogateConfig, cfg: &StudyConfig, rng: &RandomSource) -> Result<Vec<StudyRow>> {
    if cfg.repetitions == 0 || cfg.n_train.is_empty() || cfg.methods.is_empty() {
        return Err(invalid("study needs at least one repetition, training size and method"));
    }
    if cfg.n_test == 0 {
        return Err(invalid("study needs a non-empty test set"));
    }
    let test = generate_dataset(bench, cfg.n_test, &mut rng.derive("test"), 0.0).map_err(|e| e.context("test set"))?;
    let mut rows = Vec::new();
    for &n in &cfg.n_train {
        let by_n = rng.derive_indexed("train", n as u64);
        for rep in 0..cfg.repetitions {
            let train = generate_dataset(bench, n, &mut by_n.derive_indexed("rep", rep as u64), cfg.noise_std)
                .map_err(|e| e.context(format!("training set n={n} rep={rep}")))?;
            for &method in &cfg.methods {
                let mut fit_rng = rng.derive(method.name()).derive_indexed("n", n as u64).derive_indexed("rep", rep as u64);
                let s = fit_surrogate(&train, &method.config(base), &mut fit_rng)
                    .map_err(|e| e.context(format!("{} fit n={n} rep={rep}", method.name())))?;
                let nrmse = s.test_nrmse(&test)?;
                log::info!("{} n={n} rep={rep} m={} nrmse={nrmse:.4e}", method.name(), s.m());
                rows.push(StudyRow { method, n_train: n, repetition: rep, nrmse });
            }
        }
    }
    Ok(rows)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median NRMSE of one method at one training size.
pub fn median_nrmse(rows: &[StudyRow], method: StudyMethod, n_train: usize) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.method == method && r.n_train == n_train).map(|r| r.nrmse).collect();
    median(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn noreg_pins_tau() {
        let base = SurrogateConfig::new(ReducerKind::KfdrB);
        assert_eq!(StudyMethod::KfdrBNoreg.config(&base).fpca.smoothing.tau_override, Some(0.0));
        assert_eq!(StudyMethod::KfdrB.config(&base).fpca.smoothing.tau_override, None);
        assert_eq!(StudyMethod::KfdrF.config(&base).reducer, ReducerKind::KfdrF);
    }
}
