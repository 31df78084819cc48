//! Forward and inverse uncertainty quantification.
//!
//! Forward: Monte Carlo through a surrogate (latent means averaged first,
//! one basis multiplication) or any [`ResponseModel`]. Inverse: Gaussian
//! likelihood over whole observed curves, sampled with the affine-invariant
//! stretch-move ensemble sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::TimeGrid;
use crate::error::{invalid, shape, Error, Result};
use crate::model::ResponseModel;
use crate::rng::RandomSource;
use crate::surrogate::LatentSurrogate;

pub const DEFAULT_N_MCS: usize = 100_000;
/// Minimum number of KDE evaluation points per window.
pub const KDE_POINTS: usize = 1024;
/// KDE window padding in bandwidths.
pub const KDE_PAD: f64 = 8.0;

const CHUNK: usize = 1024;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One independent input marginal. A zero std is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum Marginal {
    Normal { mean: f64, std: f64 },
    /// parameterized by the mean and std of the variable itself
    Lognormal { mean: f64, std: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Normal { mean, std } => {
                if !mean.is_finite() || !(std >= 0.0) || !std.is_finite() {
                    return Err(invalid(format!("normal marginal needs finite mean and std >= 0, got ({mean}, {std})")));
                }
            }
            Marginal::Lognormal { mean, std } => {
                if !(mean > 0.0) || !mean.is_finite() || !(std >= 0.0) || !std.is_finite() {
                    return Err(invalid(format!("lognormal marginal needs mean > 0 and std >= 0, got ({mean}, {std})")));
                }
            }
            Marginal::Uniform { lower, upper } => {
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(invalid(format!("uniform marginal needs lower < upper, got [{lower}, {upper}]")));
                }
            }
        }
        Ok(())
    }

    /// `(μ, σ)` of the underlying normal.
    fn log_params(mean: f64, std: f64) -> (f64, f64) {
        let s2 = (1.0 + (std / mean).powi(2)).ln();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Marginal::Lognormal { mean, std } => {
                let (mu, s) = Self::log_params(mean, std);
                let z: f64 = StandardNormal.sample(rng);
                (mu + s * z).exp()
            }
            Marginal::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
        }
    }

    /// Log density; `-inf` outside the support. Point masses have no density.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * LN_2PI
            }
            Marginal::Lognormal { mean, std } => {
                if !(x > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let (mu, s) = Self::log_params(mean, std);
                let z = (x.ln() - mu) / s;
                -0.5 * z * z - s.ln() - x.ln() - 0.5 * LN_2PI
            }
            Marginal::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn is_point_mass(&self) -> bool {
        matches!(*self, Marginal::Normal { std, .. } | Marginal::Lognormal { std, .. } if std == 0.0)
    }
}

/// Independent product of marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub marginals: Vec<Marginal>,
}

impl InputDistribution {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(invalid("input distribution has no marginals"));
        }
        for (k, m) in marginals.iter().enumerate() {
            m.validate().map_err(|e| e.context(format!("input {}", k + 1)))?;
        }
        Ok(Self { marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// `n` draws as rows; each row consumes the stream in dimension order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n, self.dim());
        for i in 0..n {
            for (k, m) in self.marginals.iter().enumerate() {
                x[(i, k)] = m.sample(rng);
            }
        }
        x
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.marginals.iter().zip(x).map(|(m, &v)| m.ln_pdf(v)).sum()
    }

    fn check_prior(&self) -> Result<()> {
        if self.marginals.iter().any(Marginal::is_point_mass) {
            return Err(invalid("prior marginals need std > 0"));
        }
        Ok(())
    }
}

/// KDE of per-curve maxima and minima on one shared window.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremesKde {
    pub values: Vec<f64>,
    pub pdf_max: Vec<f64>,
    pub pdf_min: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardUqResult {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
    /// `None` when the extremes are degenerate (all identical)
    pub kde: Option<ExtremesKde>,
    pub n_mcs: usize,
}

fn check_forward(dist: &InputDistribution, n_inputs: usize, n_mcs: usize) -> Result<()> {
    if n_mcs < 2 {
        return Err(invalid(format!("n_mcs must be at least 2, got {n_mcs}")));
    }
    if dist.dim() != n_inputs {
        return Err(shape(format!("distribution has {} inputs, model expects {n_inputs}", dist.dim())));
    }
    Ok(())
}

fn extremes_kde(maxima: &[f64], minima: &[f64]) -> Option<ExtremesKde> {
    let (h_max, h_min) = match (silverman_bandwidth(maxima), silverman_bandwidth(minima)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("skipping extreme-value densities: {e}");
            return None;
        }
    };
    let h = h_max.max(h_min);
    let lo = minima.iter().chain(maxima).copied().fold(f64::INFINITY, f64::min) - KDE_PAD * h;
    let hi = minima.iter().chain(maxima).copied().fold(f64::NEG_INFINITY, f64::max) + KDE_PAD * h;
    // at least 5 points per smallest bandwidth so the trapezoid rule resolves both peaks
    let n = (((hi - lo) / (h_max.min(h_min) / 5.0)).ceil() as usize).clamp(KDE_POINTS, 1 << 16);
    let values: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    Some(ExtremesKde {
        pdf_max: kde_with_bandwidth(maxima, &values, h_max),
        pdf_min: kde_with_bandwidth(minima, &values, h_min),
        values,
    })
}

/// Monte Carlo through the surrogate mean. The mean curve averages the
/// latent means first; the std curve is the population std of the sample
/// curves, evaluated through the latent covariance.
pub fn forward_uq(s: &LatentSurrogate, dist: &InputDistribution, n_mcs: usize, rng: &mut RandomSource) -> Result<ForwardUqResult> {
    check_forward(dist, s.n_inputs(), n_mcs)?;
    let x = dist.sample(n_mcs, rng);
    let m = s.m();
    let rows: Vec<usize> = (0..n_mcs).collect();
    let xi: Vec<Vec<f64>> = rows
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&i| s.latent_means(&x.row(i).iter().copied().collect::<Vec<_>>())).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let nf = n_mcs as f64;
    let mut xi_bar = vec![0.0; m];
    for v in &xi {
        for k in 0..m {
            xi_bar[k] += v[k];
        }
    }
    xi_bar.iter_mut().for_each(|v| *v /= nf);
    let mut cov = DMatrix::zeros(m, m);
    for v in &xi {
        let d = DVector::from_iterator(m, v.iter().zip(&xi_bar).map(|(a, b)| a - b));
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= nf;
    let mean = s.reducer.reconstruct(&xi_bar)?;
    let phi = s.reducer.components();
    let std = (0..mean.len())
        .map(|j| {
            let row = phi.row(j);
            (&row * &cov * row.transpose())[(0, 0)].max(0.0).sqrt()
        })
        .collect();
    let (maxima, minima): (Vec<f64>, Vec<f64>) = xi
        .par_iter()
        .map(|v| {
            let c = s.reducer.reconstruct(v)?;
            Ok(extent(&c))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let kde = extremes_kde(&maxima, &minima);
    Ok(ForwardUqResult { times: s.grid().nodes(), mean, std, maxima, minima, kde, n_mcs })
}

fn extent(c: &[f64]) -> (f64, f64) {
    c.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)))
}

/// Monte Carlo through any response model (e.g. the exact simulator).
/// Curves are accumulated in fixed-size chunks, so memory stays bounded
/// and the result does not depend on the thread count.
pub fn forward_uq_model(
    model: &dyn ResponseModel,
    grid: &TimeGrid,
    dist: &InputDistribution,
    n_mcs: usize,
    rng: &mut RandomSource,
) -> Result<ForwardUqResult> {
    check_forward(dist, model.n_inputs(), n_mcs)?;
    if model.n_times() != grid.len() {
        return Err(shape(format!("model returns {} samples, grid has {}", model.n_times(), grid.len())));
    }
    let x = dist.sample(n_mcs, rng);
    let n_t = grid.len();
    let mut mean = vec![0.0; n_t];
    let mut m2 = vec![0.0; n_t];
    let mut maxima = Vec::with_capacity(n_mcs);
    let mut minima = Vec::with_capacity(n_mcs);
    let mut count = 0.0;
    for start in (0..n_mcs).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_mcs);
        let curves = (start..end)
            .into_par_iter()
            .map(|i| model.evaluate(&x.row(i).iter().copied().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        for c in curves {
            if c.len() != n_t {
                return Err(shape(format!("model returned {} samples, expected {n_t}", c.len())));
            }
            count += 1.0;
            for j in 0..n_t {
                let d = c[j] - mean[j];
                mean[j] += d / count;
                m2[j] += d * (c[j] - mean[j]);
            }
            let (hi, lo) = extent(&c);
            maxima.push(hi);
            minima.push(lo);
        }
    }
    let std = m2.iter().map(|v| (v / count).max(0.0).sqrt()).collect();
    let kde = extremes_kde(&maxima, &minima);
    Ok(ForwardUqResult { times: grid.nodes(), mean, std, maxima, minima, kde, n_mcs })
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let pos = p * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + f * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// `0.9 min(std, IQR/1.34) n^(-1/5)`; falls back to the nonzero spread
/// measure when the other one vanishes.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(invalid("KDE needs at least 2 samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("KDE samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Domain("all KDE samples are identical (zero bandwidth)".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
    let spread = match (std > 0.0, iqr > 0.0) {
        (true, true) => std.min(iqr),
        (true, false) => std,
        (false, true) => iqr,
        (false, false) => sorted[n - 1] - sorted[0],
    };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian KDE with Silverman bandwidth.
pub fn kde_pdf(samples: &[f64], eval_points: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    Ok(kde_with_bandwidth(samples, eval_points, h))
}

fn kde_with_bandwidth(samples: &[f64], eval_points: &[f64], h: f64) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    // kernels beyond 9h contribute below exp(-40)
    let cut = 9.0 * h;
    eval_points
        .par_iter()
        .map(|&t| {
            let a = sorted.partition_point(|&v| v < t - cut);
            let b = sorted.partition_point(|&v| v <= t + cut);
            let s: f64 = sorted[a..b].iter().map(|&v| (-0.5 * ((t - v) / h).powi(2)).exp()).sum();
            s * norm
        })
        .collect()
}

/// Prior on the observation-noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoisePrior {
    /// known σ, not sampled
    Fixed { sigma: f64 },
    /// σ sampled, uniform on `[lower, upper]`
    Uniform { lower: f64, upper: f64 },
}

impl NoisePrior {
    fn validate(&self) -> Result<()> {
        match *self {
            NoisePrior::Fixed { sigma } if !(sigma > 0.0) || !sigma.is_finite() => {
                Err(invalid(format!("noise sigma must be positive, got {sigma}")))
            }
            NoisePrior::Uniform { lower, upper } if !(lower > 0.0 && lower < upper) || !upper.is_finite() => {
                Err(invalid(format!("noise prior needs 0 < lower < upper, got [{lower}, {upper}]")))
            }
            _ => Ok(()),
        }
    }
}

/// `Σ_i [-(n_t/2) ln(2πσ²) - ||y_i - M(x)||² / (2σ²)]` over observation rows.
pub fn log_likelihood(prediction: &[f64], observations: &DMatrix<f64>, sigma: f64) -> f64 {
    let n_t = prediction.len() as f64;
    let s2 = sigma * sigma;
    (0..observations.nrows())
        .map(|i| {
            let ss: f64 = observations.row(i).iter().zip(prediction).map(|(y, m)| (y - m).powi(2)).sum();
            -0.5 * n_t * (LN_2PI + s2.ln()) - 0.5 * ss / s2
        })
        .sum()
}

/// Unnormalized log posterior of (calibration inputs, noise σ).
pub struct Calibration<'a> {
    model: &'a dyn ResponseModel,
    prior: InputDistribution,
    noise: NoisePrior,
    /// `N_obs x n_t`, one observation per row
    observations: DMatrix<f64>,
}

impl<'a> Calibration<'a> {
    pub fn new(model: &'a dyn ResponseModel, prior: InputDistribution, noise: NoisePrior, observations: DMatrix<f64>) -> Result<Self> {
        if observations.nrows() == 0 {
            return Err(invalid("inverse UQ needs at least one observation"));
        }
        if observations.ncols() != model.n_times() {
            return Err(shape(format!(
                "observations have {} time samples, model returns {}",
                observations.ncols(),
                model.n_times()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observations must be finite"));
        }
        if prior.dim() != model.n_inputs() {
            return Err(shape(format!("prior has {} inputs, model expects {}", prior.dim(), model.n_inputs())));
        }
        prior.check_prior()?;
        noise.validate()?;
        Ok(Self { model, prior, noise, observations })
    }

    /// Sampled dimension: inputs, plus σ unless it is fixed.
    pub fn dim(&self) -> usize {
        self.prior.dim() + usize::from(matches!(self.noise, NoisePrior::Uniform { .. }))
    }

    pub fn parameter_names(&self, input_names: &[String]) -> Vec<String> {
        let mut v = input_names.to_vec();
        if self.dim() > self.prior.dim() {
            v.push("sigma".into());
        }
        v
    }

    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let p = self.prior.dim();
        let (x, sigma, lp_sigma) = match self.noise {
            NoisePrior::Fixed { sigma } => (theta, sigma, 0.0),
            NoisePrior::Uniform { lower, upper } => {
                let s = theta[p];
                if s < lower || s > upper {
                    return f64::NEG_INFINITY;
                }
                (&theta[..p], s, -(upper - lower).ln())
            }
        };
        let lp = self.prior.ln_pdf(x) + lp_sigma;
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        match self.model.evaluate(x) {
            Ok(pred) => lp + log_likelihood(&pred, &self.observations, sigma),
            Err(e) => {
                log::debug!("model evaluation failed inside the posterior: {e}");
                f64::NEG_INFINITY
            }
        }
    }

    /// Initial walkers drawn from the prior (σ from its uniform prior).
    pub fn sample_prior(&self, walkers: usize, rng: &mut RandomSource) -> DMatrix<f64> {
        let p = self.prior.dim();
        let mut x = DMatrix::zeros(walkers, self.dim());
        for w in 0..walkers {
            for (k, m) in self.prior.marginals.iter().enumerate() {
                x[(w, k)] = m.sample(rng);
            }
            if let NoisePrior::Uniform { lower, upper } = self.noise {
                x[(w, p)] = lower + (upper - lower) * rng.random::<f64>();
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub walkers: usize,
    pub iterations: usize,
    pub burn_in: f64,
    /// stretch scale `a`
    pub stretch: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self { walkers: 100, iterations: 300, burn_in: 0.5, stretch: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// post-burn-in draws, iteration-major then walker
    pub draws: DMatrix<f64>,
    pub walkers: usize,
    pub iterations: usize,
    pub burn_in: f64,
    pub acceptance_rate: f64,
}

/// Stretch factor with density `∝ 1/√z` on `[1/a, a]`.
pub fn sample_stretch<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    ((a - 1.0) * u + 1.0).powi(2) / a
}

/// Affine-invariant ensemble sampler with stretch moves; walkers are
/// updated one at a time in index order.
pub fn ensemble_mcmc<F>(log_post: F, initial: &DMatrix<f64>, settings: &McmcSettings, rng: &mut RandomSource) -> Result<PosteriorSamples>
where
    F: Fn(&[f64]) -> f64,
{
    let (w, d) = initial.shape();
    if d == 0 {
        return Err(invalid("sampler needs at least one parameter"));
    }
    if w < 2 * (d + 1) {
        return Err(invalid(format!("need at least {} walkers for {d} parameters, got {w}", 2 * (d + 1))));
    }
    if settings.iterations < 2 {
        return Err(invalid("need at least 2 iterations"));
    }
    if !(0.0..1.0).contains(&settings.burn_in) {
        return Err(invalid(format!("burn-in fraction must be in [0, 1), got {}", settings.burn_in)));
    }
    if !(settings.stretch > 1.0) {
        return Err(invalid(format!("stretch scale must exceed 1, got {}", settings.stretch)));
    }
    let mut pos: Vec<Vec<f64>> = (0..w).map(|i| initial.row(i).iter().copied().collect()).collect();
    let mut lp: Vec<f64> = pos.iter().map(|p| log_post(p)).collect();
    if lp.iter().all(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
        return Err(Error::Sampler("log posterior is -inf at every initial walker".into()));
    }
    let burn = (settings.burn_in * settings.iterations as f64).floor() as usize;
    let kept = settings.iterations - burn;
    let mut draws = DMatrix::zeros(kept * w, d);
    let mut accepted = 0usize;
    let mut proposal = vec![0.0; d];
    for it in 0..settings.iterations {
        for k in 0..w {
            let mut j = rng.random_range(0..w - 1);
            if j >= k {
                j += 1;
            }
            let z = sample_stretch(settings.stretch, rng);
            for (q, (xk, xj)) in proposal.iter_mut().zip(pos[k].iter().zip(&pos[j])) {
                *q = xj + z * (xk - xj);
            }
            let lp_new = log_post(&proposal);
            let log_ratio = (d as f64 - 1.0) * z.ln() + lp_new - lp[k];
            let u: f64 = rng.random();
            if !log_ratio.is_nan() && u.ln() < log_ratio {
                pos[k].copy_from_slice(&proposal);
                lp[k] = lp_new;
                accepted += 1;
            }
        }
        if it >= burn {
            let base = (it - burn) * w;
            for (k, p) in pos.iter().enumerate() {
                for (c, v) in p.iter().enumerate() {
                    draws[(base + k, c)] = *v;
                }
            }
        }
    }
    Ok(PosteriorSamples {
        draws,
        walkers: w,
        iterations: settings.iterations,
        burn_in: settings.burn_in,
        acceptance_rate: accepted as f64 / (w * settings.iterations) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub variable: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Mean and equal-tailed 95% interval per column.
pub fn posterior_summary(draws: &DMatrix<f64>, names: &[String]) -> Result<Vec<ParameterSummary>> {
    if draws.nrows() == 0 {
        return Err(invalid("no posterior draws to summarize"));
    }
    if names.len() != draws.ncols() {
        return Err(shape(format!("{} names for {} parameters", names.len(), draws.ncols())));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let mut v: Vec<f64> = draws.column(c).iter().copied().collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            ParameterSummary { variable: name.clone(), mean, q025: quantile_sorted(&v, 0.025), q975: quantile_sorted(&v, 0.975) }
        })
        .collect())
}

/// Gaussian noise draws for synthetic observations.
pub fn noisy_observation(curve: &[f64], std: f64, rng: &mut RandomSource) -> Result<Vec<f64>> {
    let n = Normal::new(0.0, std).map_err(|e| invalid(format!("noise std: {e}")))?;
    Ok(curve.iter().map(|v| v + n.sample(rng)).collect())
}
