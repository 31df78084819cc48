//! Reference oscillators integrated with fixed-step classical Runge-Kutta,
//! and Latin-hypercube dataset generation from them.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ResponseEnsemble, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::model::ResponseModel;
use crate::rng::RandomSource;
use crate::sampling::latin_hypercube;
use crate::uq::{InputDistribution, Marginal};

/// Grid step is split into this many RK4 steps unless configured otherwise.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Integrates `dy/dt = f(t, y)` with classical RK4 and returns the state at
/// every grid node (row `j` is the state at `t_j`). Each grid interval is
/// covered by `substeps` equal RK4 steps.
pub fn rk4_integrate<F>(f: F, y0: &[f64], grid: &TimeGrid, substeps: usize) -> Result<DMatrix<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if substeps == 0 {
        return Err(invalid("substeps must be >= 1"));
    }
    let dim = y0.len();
    let n_t = grid.len();
    let h = grid.step() / substeps as f64;
    let mut out = DMatrix::zeros(n_t, dim);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for (d, v) in y.iter().enumerate() {
        out[(0, d)] = *v;
    }
    let t0 = grid.t0();
    for j in 1..n_t {
        for s in 0..substeps {
            let step = (j - 1) * substeps + s;
            let t = t0 + step as f64 * h;
            f(t, &y, &mut k1);
            for d in 0..dim {
                tmp[d] = y[d] + 0.5 * h * k1[d];
            }
            f(t + 0.5 * h, &tmp, &mut k2);
            for d in 0..dim {
                tmp[d] = y[d] + 0.5 * h * k2[d];
            }
            f(t + 0.5 * h, &tmp, &mut k3);
            for d in 0..dim {
                tmp[d] = y[d] + h * k3[d];
            }
            f(t + h, &tmp, &mut k4);
            for d in 0..dim {
                y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { step: step + 1, reason: "non-finite state".into() });
            }
        }
        for (d, v) in y.iter().enumerate() {
            out[(j, d)] = *v;
        }
    }
    Ok(out)
}

/// Duffing oscillator
/// `m ÿ + c ẏ + k y + k2 y² + k3 y³ = α cos(βt) + sin((β+3)t) + sin(2βt)`,
/// `ẏ(0) = 0`, `y(0) = y0`, observed on `[0, 2]` at 401 nodes.
/// Inputs: `[alpha, beta, c, y0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duffing {
    pub grid: TimeGrid,
    pub substeps: usize,
}

impl Duffing {
    pub const MASS: f64 = 1.0;
    pub const K: f64 = 1e4;
    pub const K2: f64 = 1e7;
    pub const K3: f64 = 5e9;
    pub const INPUT_NAMES: [&'static str; 4] = ["alpha", "beta", "c", "y0"];
    pub const BOUNDS: [(f64, f64); 4] = [(0.6, 1.4), (1.5, 2.5), (0.6, 1.4), (-1e-4, 0.0)];

    pub fn excitation(alpha: f64, beta: f64, t: f64) -> f64 {
        alpha * (beta * t).cos() + ((beta + 3.0) * t).sin() + (2.0 * beta * t).sin()
    }

    pub fn response(&self, x: &[f64]) -> Result<Vec<f64>> {
        let [alpha, beta, c, y0] = <[f64; 4]>::try_from(x)
            .map_err(|_| invalid(format!("Duffing takes 4 inputs, got {}", x.len())))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Duffing inputs must be finite"));
        }
        let rhs = |t: f64, s: &[f64], ds: &mut [f64]| {
            let (y, v) = (s[0], s[1]);
            ds[0] = v;
            ds[1] = (Self::excitation(alpha, beta, t) - c * v - Self::K * y - Self::K2 * y * y - Self::K3 * y * y * y)
                / Self::MASS;
        };
        let traj = rk4_integrate(rhs, &[y0, 0.0], &self.grid, self.substeps)?;
        Ok(traj.column(0).iter().copied().collect())
    }
}

impl Default for Duffing {
    fn default() -> Self {
        Self { grid: TimeGrid::new(0.0, 2.0, 401).expect("valid grid"), substeps: DEFAULT_SUBSTEPS }
    }
}

impl ResponseModel for Duffing {
    fn n_inputs(&self) -> usize {
        4
    }

    fn n_times(&self) -> usize {
        self.grid.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.response(x)
    }
}

/// Bouc-Wen hysteretic oscillator
///
/// ```text
/// m ÿ + c ẏ + k (α y + (1-α) z) = f(t)
/// ż = A ẏ - β |ẏ| |z|^{n-1} z - γ ẏ |z|^n
/// f(t) = -√(0.006 π m) Σ_{k=1}^{150} [ϑ_k cos(0.1πkt) + ϑ_{150+k} sin(0.1πkt)]
/// ```
///
/// with `A = 1`, `β = γ = 7.8e3`, `n = 3`, `z(0) = ẏ(0) = 0`, `y(0) = y0`,
/// observed on `[0, 16]` at 401 nodes. Inputs: `[m, c, k, alpha, y0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoucWen {
    pub grid: TimeGrid,
    pub substeps: usize,
    /// the 300 standard-normal excitation coefficients
    pub vartheta: Vec<f64>,
    /// unit-mass excitation on the half-step RK4 grid
    #[serde(skip)]
    unit_force: Vec<f64>,
}

impl BoucWen {
    pub const A: f64 = 1.0;
    pub const BETA: f64 = 7.8e3;
    pub const GAMMA: f64 = 7.8e3;
    pub const N: i32 = 3;
    pub const N_HARMONICS: usize = 150;
    /// Seed of the default excitation realization.
    pub const EXCITATION_SEED: u64 = 43;
    pub const INPUT_NAMES: [&'static str; 5] = ["m", "c", "k", "alpha", "y0"];
    pub const BOUNDS: [(f64, f64); 5] = [(4e4, 8e4), (8e4, 1.2e5), (4e6, 6e6), (0.1, 0.3), (-0.02, 0.02)];

    pub fn new(vartheta: Vec<f64>, substeps: usize) -> Result<Self> {
        if vartheta.len() != 2 * Self::N_HARMONICS {
            return Err(invalid(format!("need {} excitation coefficients, got {}", 2 * Self::N_HARMONICS, vartheta.len())));
        }
        if substeps == 0 {
            return Err(invalid("substeps must be >= 1"));
        }
        let mut s = Self { grid: TimeGrid::new(0.0, 16.0, 401)?, substeps, vartheta, unit_force: Vec::new() };
        s.tabulate();
        Ok(s)
    }

    /// Excitation coefficients drawn from the named default seed.
    pub fn default_vartheta() -> Vec<f64> {
        Self::draw_vartheta(&mut RandomSource::new(Self::EXCITATION_SEED).derive("bouc-wen-excitation"))
    }

    pub fn draw_vartheta(rng: &mut RandomSource) -> Vec<f64> {
        (0..2 * Self::N_HARMONICS).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// Recomputes the excitation table (after deserialization).
    pub fn restore(mut self) -> Result<Self> {
        if self.vartheta.len() != 2 * Self::N_HARMONICS {
            return Err(invalid("wrong excitation coefficient count"));
        }
        self.tabulate();
        Ok(self)
    }

    fn half_step(&self) -> f64 {
        0.5 * self.grid.step() / self.substeps as f64
    }

    fn tabulate(&mut self) {
        let n = 2 * (self.grid.len() - 1) * self.substeps + 1;
        let hh = self.half_step();
        let t0 = self.grid.t0();
        self.unit_force = (0..n).map(|i| self.unit_excitation(t0 + i as f64 * hh)).collect();
    }

    /// `f(t) / √m`.
    pub fn unit_excitation(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for k in 1..=Self::N_HARMONICS {
            let (sn, cs) = (0.1 * std::f64::consts::PI * k as f64 * t).sin_cos();
            s += self.vartheta[k - 1] * cs + self.vartheta[Self::N_HARMONICS + k - 1] * sn;
        }
        -(0.006 * std::f64::consts::PI).sqrt() * s
    }

    pub fn excitation(&self, mass: f64, t: f64) -> f64 {
        mass.sqrt() * self.unit_excitation(t)
    }

    fn tabulated_force(&self, t: f64) -> f64 {
        let idx = ((t - self.grid.t0()) / self.half_step()).round() as usize;
        self.unit_force[idx.min(self.unit_force.len() - 1)]
    }

    pub fn response(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trajectory(x)?.column(0).iter().copied().collect())
    }

    /// Full state history `(y, ẏ, z)` at the grid nodes.
    pub fn trajectory(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let [m, c, k, alpha, y0] = <[f64; 5]>::try_from(x)
            .map_err(|_| invalid(format!("Bouc-Wen takes 5 inputs, got {}", x.len())))?;
        if x.iter().any(|v| !v.is_finite()) || m <= 0.0 {
            return Err(invalid("Bouc-Wen inputs must be finite with positive mass"));
        }
        let sqrt_m = m.sqrt();
        let rhs = |t: f64, s: &[f64], ds: &mut [f64]| {
            let (y, v, z) = (s[0], s[1], s[2]);
            let f = sqrt_m * self.tabulated_force(t);
            ds[0] = v;
            ds[1] = (f - c * v - k * (alpha * y + (1.0 - alpha) * z)) / m;
            let az = z.abs();
            ds[2] = Self::A * v - Self::BETA * v.abs() * az.powi(Self::N - 1) * z - Self::GAMMA * v * az.powi(Self::N);
        };
        rk4_integrate(rhs, &[y0, 0.0, 0.0], &self.grid, self.substeps)
    }
}

impl ResponseModel for BoucWen {
    fn n_inputs(&self) -> usize {
        5
    }

    fn n_times(&self) -> usize {
        self.grid.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.response(x)
    }
}

/// A benchmark with its sampling bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Duffing(Duffing),
    BoucWen(BoucWen),
}

impl Benchmark {
    pub fn duffing() -> Self {
        Benchmark::Duffing(Duffing::default())
    }

    pub fn bouc_wen() -> Self {
        Benchmark::BoucWen(BoucWen::new(BoucWen::default_vartheta(), DEFAULT_SUBSTEPS).expect("valid default"))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "duffing" => Ok(Self::duffing()),
            "boucwen" => Ok(Self::bouc_wen()),
            other => Err(invalid(format!("unknown benchmark model '{other}' (expected duffing or boucwen)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Duffing(_) => "duffing",
            Benchmark::BoucWen(_) => "boucwen",
        }
    }

    pub fn grid(&self) -> TimeGrid {
        match self {
            Benchmark::Duffing(d) => d.grid,
            Benchmark::BoucWen(b) => b.grid,
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Benchmark::Duffing(_) => Duffing::BOUNDS.to_vec(),
            Benchmark::BoucWen(_) => BoucWen::BOUNDS.to_vec(),
        }
    }

    pub fn input_names(&self) -> Vec<String> {
        match self {
            Benchmark::Duffing(_) => Duffing::INPUT_NAMES.iter().map(|s| s.to_string()).collect(),
            Benchmark::BoucWen(_) => BoucWen::INPUT_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn as_model(&self) -> &dyn ResponseModel {
        match self {
            Benchmark::Duffing(d) => d,
            Benchmark::BoucWen(b) => b,
        }
    }

    /// Input distributions for forward propagation.
    pub fn forward_distribution(&self) -> InputDistribution {
        let m = match self {
            Benchmark::Duffing(_) => vec![
                Marginal::Normal { mean: 1.0, std: 0.05 },
                Marginal::Normal { mean: 2.0, std: 0.1 },
                Marginal::Normal { mean: 1.0, std: 0.05 },
                Marginal::Normal { mean: -5e-5, std: 5e-6 },
            ],
            Benchmark::BoucWen(_) => vec![
                Marginal::Lognormal { mean: 6e4, std: 3e3 },
                Marginal::Lognormal { mean: 1e5, std: 3e3 },
                Marginal::Lognormal { mean: 5e6, std: 1e5 },
                Marginal::Normal { mean: 0.2, std: 0.01 },
                Marginal::Normal { mean: 0.0, std: 0.002 },
            ],
        };
        InputDistribution::new(m).expect("valid table")
    }

    /// Inputs that generate the synthetic calibration observations.
    pub fn inverse_truth(&self) -> Vec<f64> {
        match self {
            Benchmark::Duffing(_) => vec![1.19, 1.82, 0.94, -3.3e-5],
            Benchmark::BoucWen(_) => vec![7e4, 1.05e5, 4.77e6, 0.21, 0.01],
        }
    }

    /// Observation noise std for the synthetic calibration data.
    pub fn inverse_noise(&self) -> f64 {
        match self {
            Benchmark::Duffing(_) => 1e-5,
            Benchmark::BoucWen(_) => 5e-3,
        }
    }

    /// Inputs held fixed during calibration (`Some(value)`).
    pub fn inverse_pinned(&self) -> Vec<Option<f64>> {
        match self {
            Benchmark::Duffing(_) => vec![None; 4],
            Benchmark::BoucWen(_) => vec![Some(7e4), None, None, None, None],
        }
    }

    /// Excitation at the grid nodes, for inputs that do not affect it
    /// (Bouc-Wen: force per √m).
    pub fn excitation_table(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Benchmark::Duffing(_) => None,
            Benchmark::BoucWen(b) => Some(b.grid.nodes().into_iter().map(|t| (t, b.unit_excitation(t))).collect()),
        }
    }

    /// Evaluates every row of `inputs` (in parallel; order preserved).
    pub fn responses(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let model = self.as_model();
        let rows: Vec<Vec<f64>> = (0..inputs.nrows()).map(|i| inputs.row(i).iter().copied().collect()).collect();
        let curves = rows.par_iter().map(|x| model.evaluate(x)).collect::<Result<Vec<_>>>()?;
        let n_t = self.grid().len();
        Ok(DMatrix::from_fn(curves.len(), n_t, |i, j| curves[i][j]))
    }
}

/// Adds i.i.d. `N(0, std²)` noise to every entry.
pub fn add_noise(responses: &mut DMatrix<f64>, std: f64, rng: &mut RandomSource) -> Result<()> {
    if !(std >= 0.0) {
        return Err(invalid(format!("noise std must be >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
    // row-major order so the draw sequence does not depend on storage layout
    for i in 0..responses.nrows() {
        for j in 0..responses.ncols() {
            responses[(i, j)] += normal.sample(rng);
        }
    }
    Ok(())
}

/// LHS inputs within the benchmark bounds, solved responses, and optional
/// additive Gaussian output noise. Noise is drawn from a stream derived from
/// `rng`, so the inputs do not depend on `noise_std`.
pub fn generate_dataset(model: &Benchmark, n: usize, rng: &mut RandomSource, noise_std: f64) -> Result<ResponseEnsemble> {
    if n == 0 {
        return Err(invalid("dataset size must be >= 1"));
    }
    let mut noise_rng = rng.derive("noise");
    let inputs = latin_hypercube(n, &model.bounds(), rng)?;
    let mut responses = model.responses(&inputs)?;
    add_noise(&mut responses, noise_std, &mut noise_rng)?;
    // consume one value so successive calls on the same rng differ
    let _: u64 = rng.random();
    ResponseEnsemble::new(inputs, responses, model.grid(), model.input_names())
}
