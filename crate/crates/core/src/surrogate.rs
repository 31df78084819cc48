//! Latent-space surrogates: a reducer (functional or plain PCA) followed by
//! one Kriging model per retained score.
//!
//! Curve prediction at `x*`: mean `μ(t) + Φ(t) μ_ξ(x*)`, variance
//! `Σ_k Φ_k(t)² σ²_k(x*)` where `Φ` holds the sampled eigenfunctions and the
//! score covariance is taken diagonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::ensemble::{center_ensemble, ResponseEnsemble, TimeGrid};
use crate::error::{invalid, shape, Error, Result};
use crate::fpca::{fit_reducer, select_m, FunctionalReducer, ReducerConfig};
use crate::kriging::{fit_kriging, KrigingConfig, KrigingModel};
use crate::metrics::model_nrmse;
use crate::model::ResponseModel;
use crate::rng::RandomSource;

/// Model file format tag and version.
pub const MODEL_FORMAT: &str = "kfdr-surrogate";
pub const MODEL_VERSION: u32 = 1;

/// Which dimension reduction feeds the Kriging stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReducerKind {
    /// functional reduction on a (mirrored) Fourier basis
    KfdrF,
    /// functional reduction on a B-spline basis
    KfdrB,
    /// PCA of the raw sampled curves
    Pca,
}

impl ReducerKind {
    pub fn name(self) -> &'static str {
        match self {
            ReducerKind::KfdrF => "kfdr-f",
            ReducerKind::KfdrB => "kfdr-b",
            ReducerKind::Pca => "pca",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kfdr-f" => Ok(ReducerKind::KfdrF),
            "kfdr-b" => Ok(ReducerKind::KfdrB),
            "pca" => Ok(ReducerKind::Pca),
            other => Err(invalid(format!("unknown reducer '{other}' (expected kfdr-f, kfdr-b or pca)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub reducer: ReducerKind,
    /// functional reducer settings (ignored for PCA except the variance fraction)
    pub fpca: ReducerConfig,
    pub kriging: KrigingConfig,
}

impl SurrogateConfig {
    pub fn new(reducer: ReducerKind) -> Self {
        let kind = match reducer {
            ReducerKind::KfdrF => BasisKind::Fourier,
            ReducerKind::KfdrB | ReducerKind::Pca => BasisKind::BSpline,
        };
        Self { reducer, fpca: ReducerConfig::new(kind), kriging: KrigingConfig::default() }
    }
}

/// Standard PCA of sampled curves; components are Euclidean-orthonormal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReducer {
    grid: TimeGrid,
    mean_curve: Vec<f64>,
    /// `n_t x m`
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    variance_fraction: f64,
}

/// PCA of the centered `N x n_t` data; `λ` are the eigenvalues of the
/// sample covariance (divisor `N - 1`).
pub fn fit_pca(ensemble: &ResponseEnsemble, fraction: f64) -> Result<(PcaReducer, DMatrix<f64>)> {
    let n = ensemble.len();
    if n < 2 {
        return Err(invalid("PCA needs at least 2 curves"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("variance fraction must be in (0, 1], got {fraction}")));
    }
    let (mean, centered) = center_ensemble(&ensemble.responses)?;
    let n_t = ensemble.grid.len();
    let scale = (n - 1) as f64;
    // eigen-decompose the smaller of the Gram and covariance matrices
    let gram_side = n <= n_t;
    let sym = if gram_side { &centered * centered.transpose() } else { centered.transpose() * &centered } / scale;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let zero_variance = centered.amax() <= 1e-12 * ensemble.responses.amax();
    let m = if zero_variance { 0 } else { select_m(&eigenvalues, fraction) };
    let mut components = DMatrix::zeros(n_t, m);
    for (col, &k) in order.iter().take(m).enumerate() {
        let mut v: DVector<f64> = if gram_side {
            let s = (eig.eigenvalues[k] * scale).sqrt();
            if !(s > 0.0) {
                return Err(Error::Singular(format!("principal direction {} has zero variance", col + 1)));
            }
            centered.transpose() * eig.eigenvectors.column(k) / s
        } else {
            eig.eigenvectors.column(k).into_owned()
        };
        if v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a }) < 0.0 {
            v.neg_mut();
        }
        components.set_column(col, &v);
    }
    let total: f64 = eigenvalues.iter().sum();
    let retained = if zero_variance { 1.0 } else { eigenvalues[..m].iter().sum::<f64>() / total };
    let scores = &centered * &components;
    let reducer = PcaReducer {
        grid: ensemble.grid,
        mean_curve: mean.iter().copied().collect(),
        components,
        eigenvalues,
        variance_fraction: retained,
    };
    Ok((reducer, scores))
}

impl PcaReducer {
    pub fn m(&self) -> usize {
        self.components.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn variance_fraction(&self) -> f64 {
        self.variance_fraction
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn mean_curve(&self) -> &[f64] {
        &self.mean_curve
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.mean_curve.len() {
            return Err(shape(format!("curve has {} samples, expected {}", y.len(), self.mean_curve.len())));
        }
        Ok((0..self.m())
            .map(|k| (0..y.len()).map(|j| self.components[(j, k)] * (y[j] - self.mean_curve[j])).sum())
            .collect())
    }
}

/// Either reducer behind a common interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reducer {
    Functional(FunctionalReducer),
    Pca(PcaReducer),
}

impl Reducer {
    pub fn m(&self) -> usize {
        match self {
            Reducer::Functional(r) => r.m(),
            Reducer::Pca(r) => r.m(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            Reducer::Functional(r) => r.grid(),
            Reducer::Pca(r) => &r.grid,
        }
    }

    pub fn mean_curve(&self) -> &[f64] {
        match self {
            Reducer::Functional(r) => r.mean_curve(),
            Reducer::Pca(r) => r.mean_curve(),
        }
    }

    /// Eigenfunctions (or principal directions) sampled on the grid, `n_t x m`.
    pub fn components(&self) -> &DMatrix<f64> {
        match self {
            Reducer::Functional(r) => r.components(),
            Reducer::Pca(r) => r.components(),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        match self {
            Reducer::Functional(r) => r.eigenvalues(),
            Reducer::Pca(r) => r.eigenvalues(),
        }
    }

    pub fn variance_fraction(&self) -> f64 {
        match self {
            Reducer::Functional(r) => r.variance_fraction(),
            Reducer::Pca(r) => r.variance_fraction(),
        }
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Reducer::Functional(r) => r.project(y),
            Reducer::Pca(r) => r.project(y),
        }
    }

    /// `μ + Φ ξ`.
    pub fn reconstruct(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.m() {
            return Err(shape(format!("expected {} scores, got {}", self.m(), xi.len())));
        }
        let comp = self.components();
        Ok(self
            .mean_curve()
            .iter()
            .enumerate()
            .map(|(j, m)| m + xi.iter().enumerate().map(|(k, x)| comp[(j, k)] * x).sum::<f64>())
            .collect())
    }

    fn restore(self) -> Result<Self> {
        Ok(match self {
            Reducer::Functional(r) => Reducer::Functional(r.restore()?),
            p @ Reducer::Pca(_) => p,
        })
    }
}

/// Curve-level predictive mean and variance on the reducer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSurrogate {
    pub kind: ReducerKind,
    pub reducer: Reducer,
    pub models: Vec<KrigingModel>,
    pub input_names: Vec<String>,
    pub input_bounds: Vec<(f64, f64)>,
    pub n_train: usize,
    pub seed: u64,
}

/// Reduces the training curves and fits one Kriging model per score.
/// Score models are fit in parallel, each on its own derived random stream.
pub fn fit_surrogate(ensemble: &ResponseEnsemble, config: &SurrogateConfig, rng: &mut RandomSource) -> Result<LatentSurrogate> {
    let p = ensemble.n_inputs();
    if ensemble.len() < 2 * p {
        log::warn!("only {} training samples for {p} inputs (fewer than 2 per input)", ensemble.len());
    }
    let (reducer, scores) = match config.reducer {
        ReducerKind::Pca => {
            let (r, s) = fit_pca(ensemble, config.fpca.variance_fraction).map_err(|e| e.context("PCA reducer"))?;
            (Reducer::Pca(r), s)
        }
        ReducerKind::KfdrF | ReducerKind::KfdrB => {
            let fit = fit_reducer(ensemble, &config.fpca).map_err(|e| e.context("functional reducer"))?;
            (Reducer::Functional(fit.reducer), fit.scores)
        }
    };
    let base = rng.derive("kriging");
    let models = (0..reducer.m())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = scores.column(k).iter().copied().collect();
            fit_kriging(&ensemble.inputs, &y, &config.kriging, &mut base.derive_indexed("score", k as u64))
                .map_err(|e| e.context(format!("Kriging model for score {}", k + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let input_bounds = (0..p)
        .map(|k| {
            let c = ensemble.inputs.column(k);
            (c.min(), c.max())
        })
        .collect();
    Ok(LatentSurrogate {
        kind: config.reducer,
        reducer,
        models,
        input_names: ensemble.input_names.clone(),
        input_bounds,
        n_train: ensemble.len(),
        seed: rng.seed(),
    })
}

/// PCA baseline with the same Kriging stage.
pub fn fit_pca_baseline(ensemble: &ResponseEnsemble, kriging: &KrigingConfig, rng: &mut RandomSource) -> Result<LatentSurrogate> {
    let config = SurrogateConfig { kriging: *kriging, ..SurrogateConfig::new(ReducerKind::Pca) };
    fit_surrogate(ensemble, &config, rng)
}

impl LatentSurrogate {
    pub fn m(&self) -> usize {
        self.models.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.reducer.grid()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(shape(format!("expected {} inputs, got {}", self.n_inputs(), x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("surrogate inputs must be finite"));
        }
        Ok(())
    }

    /// Predictive means of the latent scores.
    pub fn latent_means(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.models.iter().map(|m| m.predict_mean(x)).collect()
    }

    pub fn predict_curve(&self, x: &[f64]) -> Result<CurvePrediction> {
        self.check_input(x)?;
        let preds = self.models.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
        let mu: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let mean = self.reducer.reconstruct(&mu)?;
        let comp = self.reducer.components();
        let variance = (0..mean.len())
            .map(|j| preds.iter().enumerate().map(|(k, p)| comp[(j, k)] * comp[(j, k)] * p.variance).sum())
            .collect();
        Ok(CurvePrediction { mean, variance })
    }

    pub fn predict_mean_curve(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.reducer.reconstruct(&self.latent_means(x)?)
    }

    /// Mean curves for every row of `inputs` (rows of the result).
    pub fn predict_many(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = (0..inputs.nrows()).map(|i| inputs.row(i).iter().copied().collect()).collect();
        let curves = rows.par_iter().map(|x| self.predict_mean_curve(x)).collect::<Result<Vec<_>>>()?;
        let n_t = self.grid().len();
        Ok(DMatrix::from_fn(curves.len(), n_t, |i, j| curves[i][j]))
    }

    /// Test error of the mean prediction on a held-out ensemble.
    pub fn test_nrmse(&self, test: &ResponseEnsemble) -> Result<f64> {
        model_nrmse(&test.responses, &self.predict_many(&test.inputs)?)
    }

    /// Rebuilds cached factorizations after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        if self.models.len() != self.reducer.m() {
            return Err(Error::Format(format!(
                "{} Kriging blocks for {} latent scores",
                self.models.len(),
                self.reducer.m()
            )));
        }
        self.reducer = self.reducer.restore()?;
        self.models = self.models.into_iter().map(|m| m.restore()).collect::<Result<_>>()?;
        Ok(self)
    }

    /// Versioned JSON text of the whole surrogate.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct File<'a> {
            format: &'static str,
            version: u32,
            surrogate: &'a LatentSurrogate,
        }
        serde_json::to_string_pretty(&File { format: MODEL_FORMAT, version: MODEL_VERSION, surrogate: self })
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            format: String,
            version: u32,
            surrogate: LatentSurrogate,
        }
        let f: File = serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if f.format != MODEL_FORMAT {
            return Err(Error::Format(format!("not a surrogate model file (format '{}')", f.format)));
        }
        if f.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model file version {} (expected {MODEL_VERSION})", f.version)));
        }
        f.surrogate.restore()
    }
}

impl ResponseModel for LatentSurrogate {
    fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    fn n_times(&self) -> usize {
        self.grid().len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_mean_curve(x)
    }
}

/// Seeded permutation of `0..n` cut into `k` contiguous blocks (sizes
/// differ by at most one, larger blocks first).
pub fn fold_assignment(n: usize, k: usize, rng: &mut RandomSource) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    if k < 2 || n < k {
        return Err(invalid(format!("cross-validation needs 2 <= k <= N, got k = {k}, N = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// k-fold cross-validation; returns the held-out test error of each fold.
pub fn cross_validate(ensemble: &ResponseEnsemble, k: usize, config: &SurrogateConfig, rng: &mut RandomSource) -> Result<Vec<f64>> {
    let n = ensemble.len();
    let folds = fold_assignment(n, k, &mut rng.derive("folds"))?;
    if n - folds[0].len() < 2 {
        return Err(invalid("every training split needs at least 2 samples"));
    }
    folds
        .iter()
        .enumerate()
        .map(|(f, held)| {
            let mut mask = vec![true; n];
            held.iter().for_each(|&i| mask[i] = false);
            let train_idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
            let train = ensemble.subset(&train_idx);
            let test = ensemble.subset(held);
            let s = fit_surrogate(&train, config, &mut rng.derive_indexed("fold", f as u64))
                .map_err(|e| e.context(format!("fold {}", f + 1)))?;
            s.test_nrmse(&test)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSystem;
    use crate::fpca::DEFAULT_VARIANCE_FRACTION;
    use crate::metrics::nrmse_curve;
    use crate::sampling::latin_hypercube;
    use nalgebra::DVector;
    use rand::Rng;

    /// `y(x, t) = μ(t) + a x₁ φ(t)` with μ, φ cubic splines.
    fn linear_toy(n: usize, seed: u64) -> ResponseEnsemble {
        let grid = TimeGrid::new(0.0, 1.0, 61).unwrap();
        let basis = BasisSystem::bspline(10, 4, 0.0, 1.0).unwrap();
        let mut r = RandomSource::new(99);
        let mu = basis.combine(&DVector::from_fn(10, |_, _| r.random_range(0.5..1.5)), &grid.nodes()).unwrap();
        let phi = basis.combine(&DVector::from_fn(10, |_, _| r.random_range(-1.0..1.0)), &grid.nodes()).unwrap();
        let x = latin_hypercube(n, &[(0.0, 1.0), (0.0, 1.0)], &mut RandomSource::new(seed)).unwrap();
        let y = DMatrix::from_fn(n, 61, |i, j| mu[j] + 0.8 * x[(i, 0)] * phi[j]);
        ResponseEnsemble::new(x, y, grid, vec!["x1".into(), "x2".into()]).unwrap()
    }

    fn kfdr_b_fixed() -> SurrogateConfig {
        let mut c = SurrogateConfig::new(ReducerKind::KfdrB);
        c.fpca.n_b = Some(10);
        c.fpca.smoothing.tau_override = Some(0.0);
        c
    }

    #[test]
    fn linear_generator_is_learned() {
        let train = linear_toy(30, 1);
        let test = linear_toy(100, 2);
        let s = fit_surrogate(&train, &kfdr_b_fixed(), &mut RandomSource::new(3)).unwrap();
        assert_eq!(s.m(), 1);
        let e = s.test_nrmse(&test).unwrap();
        assert!(e <= 1e-3, "{e}");
    }

    #[test]
    fn refit_gives_identical_model_text() {
        let train = linear_toy(20, 4);
        let cfg = SurrogateConfig::new(ReducerKind::KfdrB);
        let a = fit_surrogate(&train, &cfg, &mut RandomSource::new(5)).unwrap().to_json().unwrap();
        let b = fit_surrogate(&train, &cfg, &mut RandomSource::new(5)).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let back = LatentSurrogate::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
    }

    #[test]
    fn model_file_version_is_checked() {
        let train = linear_toy(10, 4);
        let text = fit_surrogate(&train, &kfdr_b_fixed(), &mut RandomSource::new(5)).unwrap().to_json().unwrap();
        let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(matches!(LatentSurrogate::from_json(&bumped), Err(Error::Format(_))));
    }

    fn two_mode_toy(n: usize, noise: f64, seed: u64) -> ResponseEnsemble {
        let grid = TimeGrid::new(0.0, 1.0, 41).unwrap();
        let x = latin_hypercube(n, &[(0.0, 1.0), (0.0, 1.0)], &mut RandomSource::new(seed)).unwrap();
        let mut r = RandomSource::new(seed + 1);
        let y = DMatrix::from_fn(n, 41, |i, j| {
            let t = grid.node(j);
            1.0 + (3.0 * x[(i, 0)]).sin() * (2.0 * t).cos() + x[(i, 1)].powi(2) * (5.0 * t).sin()
                + noise * r.random_range(-1.0..1.0)
        });
        ResponseEnsemble::new(x, y, grid, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn variance_curve_is_nonnegative_and_rank_one_case() {
        let train = two_mode_toy(25, 1e-3, 6);
        let s = fit_surrogate(&train, &SurrogateConfig::new(ReducerKind::KfdrB), &mut RandomSource::new(1)).unwrap();
        let mut r = RandomSource::new(2);
        for _ in 0..100 {
            let x = [r.random_range(-0.2..1.2), r.random_range(-0.2..1.2)];
            assert!(s.predict_curve(&x).unwrap().variance.iter().all(|&v| v >= 0.0));
        }
        // keep only the first score
        let mut one = s.clone();
        one.models.truncate(1);
        let Reducer::Functional(_) = &one.reducer else { panic!() };
        let x = [0.3, 0.6];
        let sigma2 = one.models[0].predict(&x).unwrap().variance;
        let comp = s.reducer.components();
        let pred = {
            let preds = [one.models[0].predict(&x).unwrap()];
            (0..41).map(|j| comp[(j, 0)] * comp[(j, 0)] * preds[0].variance).collect::<Vec<_>>()
        };
        for (j, v) in pred.iter().enumerate() {
            let b1 = comp[(j, 0)];
            assert!((v - sigma2 * b1 * b1).abs() <= 1e-15 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn interpolating_surrogate_reproduces_training_reconstruction() {
        let train = two_mode_toy(20, 0.0, 7);
        let mut cfg = SurrogateConfig::new(ReducerKind::KfdrB);
        cfg.kriging.fix_nugget = Some(0.0);
        let s = fit_surrogate(&train, &cfg, &mut RandomSource::new(2)).unwrap();
        for i in 0..train.len() {
            let y = train.curve(i);
            let recon = s.reducer.reconstruct(&s.reducer.project(&y).unwrap()).unwrap();
            let pred = s.predict_mean_curve(&train.input(i)).unwrap();
            assert!(nrmse_curve(&recon, &pred).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn mean_is_affine_in_latent_means() {
        let train = two_mode_toy(20, 1e-3, 8);
        let s = fit_surrogate(&train, &SurrogateConfig::new(ReducerKind::KfdrB), &mut RandomSource::new(2)).unwrap();
        let m = s.m();
        let p1: Vec<f64> = (0..m).map(|k| k as f64 + 0.5).collect();
        let p2: Vec<f64> = (0..m).map(|k| 1.0 - k as f64).collect();
        let mix: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let (r1, r2, rm) =
            (s.reducer.reconstruct(&p1).unwrap(), s.reducer.reconstruct(&p2).unwrap(), s.reducer.reconstruct(&mix).unwrap());
        for j in 0..rm.len() {
            assert!((rm[j] - (0.3 * r1[j] + 0.7 * r2[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_bounds_prediction_error() {
        let train = two_mode_toy(30, 2e-3, 9);
        let s = fit_surrogate(&train, &SurrogateConfig::new(ReducerKind::KfdrB), &mut RandomSource::new(4)).unwrap();
        let mut recon = Vec::new();
        let mut pred = Vec::new();
        for i in 0..train.len() {
            let y = train.curve(i);
            recon.push(nrmse_curve(&y, &s.reducer.reconstruct(&s.reducer.project(&y).unwrap()).unwrap()).unwrap());
            pred.push(nrmse_curve(&y, &s.predict_mean_curve(&train.input(i)).unwrap()).unwrap());
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(&mut recon) <= median(&mut pred));
    }

    #[test]
    fn pca_single_mode_and_dense_oracle() {
        let grid = TimeGrid::new(0.0, 1.0, 30).unwrap();
        let x = DMatrix::from_fn(12, 1, |i, _| i as f64);
        let y = DMatrix::from_fn(12, 30, |i, j| 2.0 + (i as f64 - 4.5) * (j as f64 * 0.2).sin());
        let e = ResponseEnsemble::new(x, y, grid, vec!["x".into()]).unwrap();
        let (p, scores) = fit_pca(&e, DEFAULT_VARIANCE_FRACTION).unwrap();
        assert_eq!(p.m(), 1);
        let r = Reducer::Pca(p.clone());
        for i in 0..12 {
            let back = r.reconstruct(&[scores[(i, 0)]]).unwrap();
            let err = nrmse_curve(&e.curve(i), &back).unwrap();
            assert!(err <= 1e-8, "{i} {err}");
        }

        let e2 = two_mode_toy(15, 1e-2, 3);
        let (p2, _) = fit_pca(&e2, DEFAULT_VARIANCE_FRACTION).unwrap();
        let (_, c) = center_ensemble(&e2.responses).unwrap();
        let cov = c.transpose() * &c / 14.0;
        let mut oracle: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for k in 0..14 {
            assert!((p2.eigenvalues()[k] - oracle[k]).abs() <= 1e-8 * oracle[0]);
        }
        assert!(p2.variance_fraction() >= 0.99);
        let g = p2.components().transpose() * p2.components();
        assert!((g - DMatrix::identity(p2.m(), p2.m())).amax() < 1e-10);
    }

    #[test]
    fn folds_partition_the_samples() {
        let a = fold_assignment(23, 5, &mut RandomSource::new(1)).unwrap();
        let b = fold_assignment(23, 5, &mut RandomSource::new(2)).unwrap();
        assert_ne!(a, b);
        for folds in [a, b] {
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
            let mut all: Vec<usize> = folds.concat();
            all.sort();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
        assert!(fold_assignment(3, 4, &mut RandomSource::new(1)).is_err());
        assert!(fold_assignment(3, 1, &mut RandomSource::new(1)).is_err());
    }

    #[test]
    fn cross_validation_on_linear_toy() {
        let e = linear_toy(10, 11);
        let loo = cross_validate(&e, 10, &kfdr_b_fixed(), &mut RandomSource::new(1)).unwrap();
        assert_eq!(loo.len(), 10);
        let e = linear_toy(40, 12);
        let errs = cross_validate(&e, 5, &kfdr_b_fixed(), &mut RandomSource::new(1)).unwrap();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean <= 1e-2, "{mean}");
    }
}
