//! Ordinary Kriging with a homoscedastic nugget for one scalar output.
//!
//! Kernel `σ_Z² exp(-Σ_k θ_k (x_k - x'_k)²)` on inputs mapped to the unit
//! box; targets are standardized. The constant mean is profiled out of the
//! marginal likelihood and the remaining hyperparameters are searched in
//! log10 space by multi-start Nelder-Mead from a Latin-hypercube design.
//!
//! Predictive variance is `k(x*,x*) - k*ᵀ (K + σ_n² I)⁻¹ k*`: the latent
//! function's variance, without the nugget and without the
//! mean-estimation correction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::DenseCholesky;
use crate::rng::RandomSource;
use crate::sampling::latin_hypercube;

pub const LOG10_THETA_BOUNDS: (f64, f64) = (-4.0, 4.0);
pub const LOG10_SIGMA_Z2_BOUNDS: (f64, f64) = (-4.0, 2.0);
pub const LOG10_SIGMA_N2_BOUNDS: (f64, f64) = (-8.0, 1.0);

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingConfig {
    pub n_starts: usize,
    /// objective evaluations per start
    pub budget: usize,
    /// pins σ_n² (standardized units) instead of estimating it
    pub fix_nugget: Option<f64>,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self { n_starts: 10, budget: 400, fix_nugget: None }
    }
}

/// `σ_Z² exp(-Σ θ_k (x_k - x2_k)²)`.
pub fn kernel_eval(sigma_z2: f64, theta: &[f64], x: &[f64], x2: &[f64]) -> f64 {
    let d: f64 = theta.iter().zip(x.iter().zip(x2)).map(|(t, (a, b))| t * (a - b) * (a - b)).sum();
    sigma_z2 * (-d).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub theta: Vec<f64>,
    pub sigma_z2: f64,
    pub sigma_n2: f64,
}

impl Hyperparameters {
    fn check(&self) -> Result<()> {
        if self.theta.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("theta must be positive and finite"));
        }
        if !(self.sigma_z2 > 0.0 && self.sigma_z2.is_finite()) || !(self.sigma_n2 >= 0.0 && self.sigma_n2.is_finite()) {
            return Err(invalid("need sigma_z2 > 0 and sigma_n2 >= 0"));
        }
        Ok(())
    }
}

/// Pairwise per-dimension squared differences of the training inputs,
/// reused across likelihood evaluations.
struct Distances {
    n: usize,
    p: usize,
    /// for each pair i > j (row-major lower triangle), p squared differences
    d2: Vec<f64>,
}

impl Distances {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut d2 = Vec::with_capacity(n * (n - 1) / 2 * p);
        for i in 0..n {
            for j in 0..i {
                for k in 0..p {
                    let d = x[(i, k)] - x[(j, k)];
                    d2.push(d * d);
                }
            }
        }
        Self { n, p, d2 }
    }

    /// Row-major `K + σ_n² I` (lower triangle filled).
    fn covariance(&self, h: &Hyperparameters, out: &mut Vec<f64>) {
        let n = self.n;
        out.clear();
        out.resize(n * n, 0.0);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..i {
                let s: f64 = self.d2[idx..idx + self.p].iter().zip(&h.theta).map(|(d, t)| d * t).sum();
                idx += self.p;
                out[i * n + j] = h.sigma_z2 * (-s).exp();
            }
            out[i * n + i] = h.sigma_z2 + h.sigma_n2;
        }
    }
}

/// Factor, profiled mean and weights for one hyperparameter setting.
struct Profile {
    chol: DenseCholesky,
    mu: f64,
    /// `A⁻¹ (y - μ 1)`
    alpha: Vec<f64>,
    lml: f64,
}

fn profile(dist: &Distances, y: &[f64], h: &Hyperparameters, buf: &mut Vec<f64>) -> Option<Profile> {
    let n = dist.n;
    dist.covariance(h, buf);
    let chol = DenseCholesky::factor(buf, n)?;
    let mut a = y.to_vec();
    chol.solve_lower(&mut a);
    let mut b = vec![1.0; n];
    chol.solve_lower(&mut b);
    let yy: f64 = a.iter().map(|v| v * v).sum();
    let oy: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let oo: f64 = b.iter().map(|v| v * v).sum();
    let mu = oy / oo;
    let quad = yy - oy * oy / oo;
    let lml = -0.5 * quad.max(0.0) - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
    if !lml.is_finite() {
        return None;
    }
    let mut alpha: Vec<f64> = y.iter().map(|v| v - mu).collect();
    chol.solve(&mut alpha);
    Some(Profile { chol, mu, alpha, lml })
}

/// Log marginal likelihood with the constant mean profiled out:
/// `-½ rᵀA⁻¹r - ½ ln|A| - (N/2) ln 2π`, `A = K + σ_n² I`,
/// `r = y - μ̂ 1`, `μ̂ = 1ᵀA⁻¹y / 1ᵀA⁻¹1`. Returns `-∞` when `A` is not
/// numerically positive definite.
pub fn log_marginal_likelihood(x: &DMatrix<f64>, y: &[f64], h: &Hyperparameters) -> Result<f64> {
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(shape(format!("{} input rows vs {} targets", x.nrows(), y.len())));
    }
    if h.theta.len() != x.ncols() {
        return Err(shape(format!("{} length scales for {} inputs", h.theta.len(), x.ncols())));
    }
    h.check()?;
    let dist = Distances::new(x);
    Ok(profile(&dist, y, h, &mut Vec::new()).map_or(f64::NEG_INFINITY, |p| p.lml))
}

/// Box-constrained Nelder-Mead: points are projected onto the box before
/// evaluation; stops after `budget` evaluations or when the simplex has
/// collapsed in both value and position.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let project = |x: &mut [f64]| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    simplex.push(start.clone());
    for i in 0..d {
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo);
        let mut p = start.clone();
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        project(&mut p);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

    while evals < budget {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[d]);
        let spread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if best.is_finite() && worst - best <= 1e-10 * (1.0 + best.abs()) && spread <= 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (w - c)).collect();
            project(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let (xc, fc) = if fr < values[d] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let p: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    values[i] = eval(&p, &mut evals);
                    simplex[i] = p;
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].clone(), values[best], evals)
}

/// A fitted Kriging model for one output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrigingModel {
    /// per-dimension training minimum and width (width 1 for constant inputs)
    input_offset: Vec<f64>,
    input_width: Vec<f64>,
    x_norm: DMatrix<f64>,
    /// standardized targets
    y: Vec<f64>,
    y_offset: f64,
    y_scale: f64,
    /// hyperparameters in standardized units
    hyper: Hyperparameters,
    mu: f64,
    alpha: Vec<f64>,
    log_likelihood: f64,
    #[serde(skip)]
    chol: Option<DenseCholesky>,
}

impl PartialEq for KrigingModel {
    fn eq(&self, other: &Self) -> bool {
        self.input_offset == other.input_offset
            && self.input_width == other.input_width
            && self.x_norm == other.x_norm
            && self.y == other.y
            && self.y_offset == other.y_offset
            && self.y_scale == other.y_scale
            && self.hyper == other.hyper
            && self.mu == other.mu
            && self.alpha == other.alpha
    }
}

/// Predictive mean and variance (output units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

fn normalize_inputs(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    let (n, p) = x.shape();
    let mut offset = vec![0.0; p];
    let mut width = vec![1.0; p];
    let mut xn = DMatrix::zeros(n, p);
    for k in 0..p {
        let col = x.column(k);
        let lo = col.min();
        let hi = col.max();
        offset[k] = lo;
        if hi > lo {
            width[k] = hi - lo;
        }
        for i in 0..n {
            xn[(i, k)] = (x[(i, k)] - lo) / width[k];
        }
    }
    (offset, width, xn)
}

/// Fits hyperparameters by maximizing the profiled marginal likelihood.
pub fn fit_kriging(x: &DMatrix<f64>, y: &[f64], config: &KrigingConfig, rng: &mut RandomSource) -> Result<KrigingModel> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(invalid("Kriging needs at least 2 training points"));
    }
    if y.len() != n {
        return Err(shape(format!("{n} input rows vs {} targets", y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("Kriging training data must be finite"));
    }
    if config.n_starts == 0 || config.budget == 0 {
        return Err(invalid("Kriging search needs n_starts >= 1 and budget >= 1"));
    }
    if let Some(s) = config.fix_nugget {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(invalid(format!("fixed nugget must be >= 0, got {s}")));
        }
    }
    let (input_offset, input_width, x_norm) = normalize_inputs(x);
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let y_scale = if sd > 0.0 { sd } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / y_scale).collect();

    let dist = Distances::new(&x_norm);
    let mut bounds = vec![LOG10_THETA_BOUNDS; p];
    bounds.push(LOG10_SIGMA_Z2_BOUNDS);
    if config.fix_nugget.is_none() {
        bounds.push(LOG10_SIGMA_N2_BOUNDS);
    }
    let decode = |v: &[f64]| Hyperparameters {
        theta: v[..p].iter().map(|t| 10f64.powf(*t)).collect(),
        sigma_z2: 10f64.powf(v[p]),
        sigma_n2: config.fix_nugget.unwrap_or_else(|| 10f64.powf(v[p + 1])),
    };
    let starts = latin_hypercube(config.n_starts, &bounds, rng)?;
    let mut buf = Vec::with_capacity(n * n);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..config.n_starts {
        let x0: Vec<f64> = starts.row(s).iter().copied().collect();
        let objective = |v: &[f64]| profile(&dist, &ys, &decode(v), &mut buf).map_or(f64::INFINITY, |pr| -pr.lml);
        let (xb, fb, _) = nelder_mead(objective, &x0, &bounds, config.budget);
        if fb.is_finite() && best.as_ref().is_none_or(|(_, f)| fb < *f) {
            best = Some((xb, fb));
        }
    }
    let (xb, _) = best.ok_or_else(|| Error::Kriging("covariance matrix not positive definite at any start".into()))?;
    let hyper = decode(&xb);
    let pr = profile(&dist, &ys, &hyper, &mut buf)
        .ok_or_else(|| Error::Kriging("covariance matrix not positive definite at the optimum".into()))?;
    log::debug!(
        "kriging: theta {:?}, sigma_z2 {:e}, sigma_n2 {:e}, lml {:.4}",
        hyper.theta,
        hyper.sigma_z2,
        hyper.sigma_n2,
        pr.lml
    );
    Ok(KrigingModel {
        input_offset,
        input_width,
        x_norm,
        y: ys,
        y_offset: mean,
        y_scale,
        hyper,
        mu: pr.mu,
        alpha: pr.alpha,
        log_likelihood: pr.lml,
        chol: Some(pr.chol),
    })
}

impl KrigingModel {
    /// Builds a model at given hyperparameters (standardized units) without
    /// any search.
    pub fn with_hyperparameters(x: &DMatrix<f64>, y: &[f64], hyper: Hyperparameters) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n || hyper.theta.len() != p || n == 0 {
            return Err(shape("inconsistent Kriging inputs"));
        }
        hyper.check()?;
        let (input_offset, input_width, x_norm) = normalize_inputs(x);
        let mean = y.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 { (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        let y_scale = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - mean) / y_scale).collect();
        let pr = profile(&Distances::new(&x_norm), &ys, &hyper, &mut Vec::new())
            .ok_or_else(|| Error::Kriging("covariance matrix not positive definite".into()))?;
        Ok(Self {
            input_offset,
            input_width,
            x_norm,
            y: ys,
            y_offset: mean,
            y_scale,
            hyper,
            mu: pr.mu,
            alpha: pr.alpha,
            log_likelihood: pr.lml,
            chol: Some(pr.chol),
        })
    }

    /// Refactors the covariance after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        let n = self.x_norm.nrows();
        if self.y.len() != n || self.alpha.len() != n || self.hyper.theta.len() != self.x_norm.ncols() {
            return Err(Error::Format("Kriging block has inconsistent sizes".into()));
        }
        let pr = profile(&Distances::new(&self.x_norm), &self.y, &self.hyper, &mut Vec::new())
            .ok_or_else(|| Error::Format("stored Kriging hyperparameters give a singular covariance".into()))?;
        self.chol = Some(pr.chol);
        Ok(self)
    }

    pub fn n_inputs(&self) -> usize {
        self.x_norm.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.x_norm.nrows()
    }

    /// Hyperparameters for standardized targets and unit-box inputs.
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// Process variance in output units.
    pub fn process_variance(&self) -> f64 {
        self.hyper.sigma_z2 * self.y_scale * self.y_scale
    }

    /// Nugget variance in output units.
    pub fn noise_variance(&self) -> f64 {
        self.hyper.sigma_n2 * self.y_scale * self.y_scale
    }

    /// Profiled constant mean in output units.
    pub fn mean_level(&self) -> f64 {
        self.y_offset + self.y_scale * self.mu
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    fn normalize(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(shape(format!("expected {} inputs, got {}", self.n_inputs(), x.len())));
        }
        for k in 0..x.len() {
            out[k] = (x[k] - self.input_offset[k]) / self.input_width[k];
        }
        Ok(())
    }

    fn cross_covariance(&self, xn: &[f64]) -> Vec<f64> {
        (0..self.n_train())
            .map(|i| {
                let d: f64 = (0..xn.len())
                    .map(|k| {
                        let v = self.x_norm[(i, k)] - xn[k];
                        self.hyper.theta[k] * v * v
                    })
                    .sum();
                self.hyper.sigma_z2 * (-d).exp()
            })
            .collect()
    }

    /// Predictive mean only (no triangular solve).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        let mut xn = vec![0.0; x.len()];
        self.normalize(x, &mut xn)?;
        let k = self.cross_covariance(&xn);
        let m = self.mu + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        Ok(self.y_offset + self.y_scale * m)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let chol = self.chol.as_ref().ok_or_else(|| Error::Kriging("model not restored after loading".into()))?;
        let mut xn = vec![0.0; x.len()];
        self.normalize(x, &mut xn)?;
        let mut k = self.cross_covariance(&xn);
        let m = self.mu + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        chol.solve_lower(&mut k);
        let raw = self.hyper.sigma_z2 - k.iter().map(|v| v * v).sum::<f64>();
        if raw < 0.0 {
            log::trace!("kriging variance clamped from {raw:e}");
        }
        let var = raw.clamp(0.0, self.hyper.sigma_z2);
        Ok(Prediction { mean: self.y_offset + self.y_scale * m, variance: var * self.y_scale * self.y_scale })
    }
}
