//! Functional principal component analysis in basis-coefficient space.
//!
//! Curves are centered, projected onto a penalized basis, and the
//! coefficient covariance is diagonalised in the `W`-metric:
//! `(N-1)⁻¹ W^½ C Cᵀ W^½ u = λ u`, `b = W^-½ u`. Scores of a curve are
//! `ξ = Bᵀ W c` with `c = (HᵀH + τR)⁻¹ Hᵀ (y - μ)`.
//!
//! `BᵀW` is the `W`-orthonormal left inverse of `B`. The exact minimiser of
//! the penalized score objective would instead be
//! `(Bᵀ(HᵀH + τR)B)⁻¹ BᵀHᵀ y`; both agree on curves in the span of `HB`
//! when `τ = 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSystem};
use crate::ensemble::{center_ensemble, mirror_periodic, ResponseEnsemble, TimeGrid};
use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{bandwidth, factor_with_jitter};
use crate::smoothing::{basis_for, select_nb, select_tau_with, NbSelection, NbSettings, PenalizedLs};

/// Default retained-variance threshold for choosing `m`.
pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.99;

/// Negative eigenvalues down to `-NEG_EIG_TOL · λ₁` are round-off.
const NEG_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducerConfig {
    pub smoothing: NbSettings,
    /// Fit the even periodic extension instead of the raw curve (the usual
    /// choice for Fourier, whose functions are periodic on the interval).
    pub mirror: bool,
    /// Use exactly this many basis functions instead of growing the count.
    pub n_b: Option<usize>,
    pub variance_fraction: f64,
}

impl ReducerConfig {
    pub fn new(kind: BasisKind) -> Self {
        Self {
            smoothing: NbSettings::new(kind),
            mirror: kind == BasisKind::Fourier,
            n_b: None,
            variance_fraction: DEFAULT_VARIANCE_FRACTION,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.smoothing.kind
    }
}

/// Smallest `m` with `Σ_{i<m} λ_i / Σ λ_i ≥ fraction`; 0 for an all-zero
/// spectrum.
pub fn select_m(eigenvalues: &[f64], fraction: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    let mut cum = 0.0;
    for (i, l) in eigenvalues.iter().enumerate() {
        cum += l;
        // relative slack keeps exact ties (e.g. fraction = 1) from failing on round-off
        if cum >= fraction * total * (1.0 - 1e-14) {
            return i + 1;
        }
    }
    eigenvalues.len()
}

/// Precomputed linear maps, rebuilt after deserialization.
#[derive(Debug, Clone, PartialEq)]
struct Maps {
    /// `Bᵀ W (HᵀH + τR)⁻¹ Hᵀ`, `m x n_fit`
    projector: DMatrix<f64>,
    /// `H B` on the original grid, `n_t x m`
    components: DMatrix<f64>,
}

impl Default for Maps {
    fn default() -> Self {
        Self { projector: DMatrix::zeros(0, 0), components: DMatrix::zeros(0, 0) }
    }
}

/// A fitted functional reducer: maps curves on `grid` to `m` latent scores
/// and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReducer {
    grid: TimeGrid,
    mirrored: bool,
    mean_curve: Vec<f64>,
    basis: BasisSystem,
    tau: f64,
    /// `n_b x m`, columns `W`-orthonormal
    b: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    variance_fraction: f64,
    selection: Option<NbSelection>,
    #[serde(skip)]
    maps: Maps,
}

/// Reducer plus the training-set quantities produced along the way.
#[derive(Debug, Clone)]
pub struct FpcaFit {
    pub reducer: FunctionalReducer,
    /// `n_b x N` coefficient matrix of the centered training curves
    pub coeffs: DMatrix<f64>,
    /// `N x m` training scores `(BᵀW C)ᵀ`
    pub scores: DMatrix<f64>,
}

fn fit_times(grid: &TimeGrid, mirror: bool) -> (Vec<f64>, (f64, f64)) {
    if mirror {
        (grid.mirrored_nodes(), (grid.t0(), 2.0 * grid.te() - grid.t0()))
    } else {
        (grid.nodes(), (grid.t0(), grid.te()))
    }
}

fn mirror_rows(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n_t = y.ncols();
    let mut out = DMatrix::zeros(y.nrows(), 2 * n_t - 2);
    for i in 0..y.nrows() {
        let row: Vec<f64> = y.row(i).iter().copied().collect();
        for (j, v) in mirror_periodic(&row)?.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Symmetric square root and inverse square root of a PD matrix.
fn sqrt_pair(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(w.clone());
    if eig.eigenvalues.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Singular("Gram matrix is not positive definite".into()));
    }
    let v = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = DMatrix::from_diagonal(&eig.eigenvalues.map(|d| 1.0 / d.sqrt()));
    Ok((v * s * v.transpose(), v * si * v.transpose()))
}

/// Centers the ensemble, chooses the basis size and τ (or uses the fixed
/// values in `config`), solves the metric eigenproblem and keeps the
/// leading `m` eigenfunctions.
pub fn fit_reducer(ensemble: &ResponseEnsemble, config: &ReducerConfig) -> Result<FpcaFit> {
    let n = ensemble.len();
    if n < 2 {
        return Err(invalid("functional PCA needs at least 2 curves"));
    }
    if !(config.variance_fraction > 0.0 && config.variance_fraction <= 1.0) {
        return Err(invalid(format!("variance fraction must be in (0, 1], got {}", config.variance_fraction)));
    }
    let grid = ensemble.grid;
    let (mean, centered) = center_ensemble(&ensemble.responses)?;
    let data = if config.mirror { mirror_rows(&centered)? } else { centered.clone() };
    let (times, interval) = fit_times(&grid, config.mirror);
    let settings = &config.smoothing;

    let (basis, tau, selection) = match config.n_b {
        Some(n_b) => {
            let basis = basis_for(settings.kind, n_b, settings.order, interval.0, interval.1)?;
            (basis, None, None)
        }
        None => {
            let sel = select_nb(settings, interval, &times, &data).map_err(|e| e.context("choosing basis size"))?;
            let basis = basis_for(settings.kind, sel.n_b, settings.order, interval.0, interval.1)?;
            (basis, Some(sel.tau), Some(sel))
        }
    };
    let h = basis.design_matrix(&times)?;
    let r = basis.roughness_matrix();
    let problem = PenalizedLs::new(&h, &r, &data)?.with_gcv_count(settings.gcv_count);
    let tau = match (tau, settings.tau_override) {
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => select_tau_with(&problem, settings.n_tau)?.tau,
    };
    let fit = problem.fit(tau)?;
    let coeffs = fit.coeffs;

    let w = basis.gram_matrix();
    let fourier = basis.kind() == BasisKind::Fourier;
    let (w_half, w_half_inv) = if fourier {
        (DMatrix::identity(basis.len(), basis.len()), DMatrix::identity(basis.len(), basis.len()))
    } else {
        sqrt_pair(&w)?
    };
    let wc = &w_half * &coeffs;
    let mut cov = &wc * wc.transpose() / (n - 1) as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let mut eigenvalues = Vec::with_capacity(order.len());
    for &k in &order {
        let l = eig.eigenvalues[k];
        if l < 0.0 {
            if l < -NEG_EIG_TOL * lambda_max {
                return Err(Error::Domain(format!("covariance eigenvalue {l:e} is negative beyond round-off")));
            }
            eigenvalues.push(0.0);
        } else {
            eigenvalues.push(l);
        }
    }

    let raw_scale = ensemble.responses.amax();
    let zero_variance = centered.amax() <= 1e-12 * raw_scale || lambda_max == 0.0;
    let m = if zero_variance { 0 } else { select_m(&eigenvalues, config.variance_fraction) };
    let mut b = DMatrix::zeros(basis.len(), m);
    for (col, &k) in order.iter().take(m).enumerate() {
        let mut bk: DVector<f64> = &w_half_inv * eig.eigenvectors.column(k);
        let pivot = bk.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if pivot < 0.0 {
            bk.neg_mut();
        }
        b.set_column(col, &bk);
    }
    let retained = if zero_variance {
        1.0
    } else {
        eigenvalues[..m].iter().sum::<f64>() / eigenvalues.iter().sum::<f64>()
    };
    let mut reducer = FunctionalReducer {
        grid,
        mirrored: config.mirror,
        mean_curve: mean.iter().copied().collect(),
        basis,
        tau,
        b,
        eigenvalues,
        variance_fraction: retained,
        selection,
        maps: Maps::default(),
    };
    reducer.build_maps()?;
    let scores = (reducer.b.transpose() * &w * &coeffs).transpose();
    log::debug!("functional reducer: n_b {}, tau {tau:e}, m {m}", reducer.basis.len());
    Ok(FpcaFit { reducer, coeffs, scores })
}

impl FunctionalReducer {
    fn build_maps(&mut self) -> Result<()> {
        let (times, _) = fit_times(&self.grid, self.mirrored);
        let h = self.basis.design_matrix(&times)?;
        let r = self.basis.roughness_matrix();
        let sys = h.transpose() * &h + r * self.tau;
        let bw = bandwidth(&sys, 1e-13);
        let (factor, _) = factor_with_jitter(&sys, bw)?;
        let mut z = h.transpose();
        for mut col in z.column_iter_mut() {
            factor.solve(col.as_mut_slice());
        }
        let w = self.basis.gram_matrix();
        let projector = self.b.transpose() * w * z;
        let h_grid = self.basis.design_matrix(&self.grid.nodes())?;
        self.maps = Maps { projector, components: h_grid * &self.b };
        Ok(())
    }

    /// Rebuilds derived state after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        self.basis = self.basis.restore()?;
        if self.mean_curve.len() != self.grid.len() || self.b.nrows() != self.basis.len() {
            return Err(Error::Format("reducer fields have inconsistent sizes".into()));
        }
        self.build_maps()?;
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn mean_curve(&self) -> &[f64] {
        &self.mean_curve
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn variance_fraction(&self) -> f64 {
        self.variance_fraction
    }

    /// `B`, `n_b x m`.
    pub fn eigen_coordinates(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Eigenfunctions sampled on the grid (`H B`, `n_t x m`).
    pub fn components(&self) -> &DMatrix<f64> {
        &self.maps.components
    }

    /// Basis-size transcript, when the size was chosen from data.
    pub fn selection(&self) -> Option<&NbSelection> {
        self.selection.as_ref()
    }

    fn fit_vector(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.grid.len() {
            return Err(shape(format!("curve has {} samples, reducer grid has {}", y.len(), self.grid.len())));
        }
        let c: Vec<f64> = y.iter().zip(&self.mean_curve).map(|(a, b)| a - b).collect();
        if self.mirrored {
            mirror_periodic(&c)
        } else {
            Ok(c)
        }
    }

    /// Latent scores `ξ = Bᵀ W (HᵀH + τR)⁻¹ Hᵀ (y - μ)`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let v = DVector::from_vec(self.fit_vector(y)?);
        Ok((&self.maps.projector * v).iter().copied().collect())
    }

    /// Scores for every row of `curves` (`N x m`).
    pub fn project_many(&self, curves: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(curves.nrows(), self.m());
        for i in 0..curves.nrows() {
            let row: Vec<f64> = curves.row(i).iter().copied().collect();
            for (k, v) in self.project(&row)?.into_iter().enumerate() {
                out[(i, k)] = v;
            }
        }
        Ok(out)
    }

    /// `μ + H B ξ` on the grid.
    pub fn reconstruct(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.m() {
            return Err(shape(format!("expected {} scores, got {}", self.m(), xi.len())));
        }
        let comp = &self.maps.components;
        Ok((0..self.grid.len())
            .map(|j| self.mean_curve[j] + (0..xi.len()).map(|k| comp[(j, k)] * xi[k]).sum::<f64>())
            .collect())
    }

    /// Row-wise [`reconstruct`](Self::reconstruct) of an `N x m` score matrix.
    pub fn reconstruct_many(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.m() {
            return Err(shape(format!("expected {} score columns, got {}", self.m(), scores.ncols())));
        }
        let mut out = scores * self.maps.components.transpose();
        for mut row in out.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(&self.mean_curve) {
                *v += m;
            }
        }
        Ok(out)
    }
}
