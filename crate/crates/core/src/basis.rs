//! Fourier and B-spline basis systems and their structural matrices:
//! evaluation `H`, roughness `R = ∫ D²η D²ηᵀ dt` and Gram `W = ∫ η ηᵀ dt`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which family of basis functions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Fourier,
    #[serde(alias = "bspline")]
    BSpline,
}

/// A basis over `[t0, te]`.
///
/// Fourier functions are orthonormal on the interval (period `te - t0`):
/// `1/√T, √(2/T) sin(kω(t-t0)), √(2/T) cos(kω(t-t0))`, `ω = 2π/T`, so the Gram
/// matrix is the identity. B-splines use clamped uniform knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSystem {
    kind: BasisKind,
    n_b: usize,
    t0: f64,
    te: f64,
    /// spline order (degree + 1); unused for Fourier
    order: usize,
    #[serde(skip)]
    knots: Vec<f64>,
}

// 5-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 9.
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

impl BasisSystem {
    pub fn fourier(n_b: usize, t0: f64, te: f64) -> Result<Self> {
        check_interval(t0, te)?;
        if n_b < 3 || n_b % 2 == 0 {
            return Err(invalid(format!("Fourier basis needs an odd count >= 3, got {n_b}")));
        }
        Ok(Self { kind: BasisKind::Fourier, n_b, t0, te, order: 0, knots: Vec::new() })
    }

    /// Clamped B-splines of the given order with uniform breakpoints.
    pub fn bspline(n_b: usize, order: usize, t0: f64, te: f64) -> Result<Self> {
        check_interval(t0, te)?;
        if order < 4 {
            return Err(invalid(format!("B-spline order must be >= 4, got {order}")));
        }
        if n_b < order {
            return Err(invalid(format!("need at least {order} B-splines of order {order}, got {n_b}")));
        }
        let mut s = Self { kind: BasisKind::BSpline, n_b, t0, te, order, knots: Vec::new() };
        s.rebuild_knots();
        Ok(s)
    }

    /// Builds a system of `kind` with `n_b` functions; Fourier counts must be odd.
    pub fn new(kind: BasisKind, n_b: usize, order: usize, t0: f64, te: f64) -> Result<Self> {
        match kind {
            BasisKind::Fourier => Self::fourier(n_b, t0, te),
            BasisKind::BSpline => Self::bspline(n_b, order, t0, te),
        }
    }

    fn rebuild_knots(&mut self) {
        if self.kind != BasisKind::BSpline {
            return;
        }
        let n_int = self.n_b - self.order + 1;
        let h = (self.te - self.t0) / n_int as f64;
        let mut knots = vec![self.t0; self.order];
        knots.extend((1..n_int).map(|i| self.t0 + i as f64 * h));
        knots.extend(std::iter::repeat_n(self.te, self.order));
        self.knots = knots;
    }

    /// Restores derived state after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        check_interval(self.t0, self.te)?;
        self.rebuild_knots();
        Ok(self)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n_b
    }

    pub fn is_empty(&self) -> bool {
        self.n_b == 0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.te)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let tol = 1e-12 * (self.te - self.t0);
        if !(t >= self.t0 - tol && t <= self.te + tol) {
            return Err(Error::Domain(format!(
                "t = {t} outside basis interval [{}, {}]",
                self.t0, self.te
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check_t(t)?;
        let mut out = vec![0.0; self.n_b];
        self.eval_into(t, 0, &mut out);
        Ok(out)
    }

    /// Second derivatives of every basis function at `t`.
    pub fn eval_d2(&self, t: f64) -> Result<Vec<f64>> {
        self.check_t(t)?;
        let mut out = vec![0.0; self.n_b];
        self.eval_into(t, 2, &mut out);
        Ok(out)
    }

    fn eval_into(&self, t: f64, deriv: usize, out: &mut [f64]) {
        match self.kind {
            BasisKind::Fourier => self.fourier_into(t, deriv, out),
            BasisKind::BSpline => {
                let (span, vals) = self.bspline_local(t, deriv);
                let first = span + 1 - self.order;
                out[first..first + self.order].copy_from_slice(&vals);
            }
        }
    }

    fn fourier_into(&self, t: f64, deriv: usize, out: &mut [f64]) {
        let period = self.te - self.t0;
        let omega = 2.0 * std::f64::consts::PI / period;
        let c0 = 1.0 / period.sqrt();
        let c = (2.0 / period).sqrt();
        let s = t - self.t0;
        out[0] = if deriv == 0 { c0 } else { 0.0 };
        for k in 1..=(self.n_b - 1) / 2 {
            let w = k as f64 * omega;
            let (sn, cs) = (w * s).sin_cos();
            let (a, b) = match deriv {
                0 => (sn, cs),
                1 => (w * cs, -w * sn),
                _ => (-w * w * sn, -w * w * cs),
            };
            out[2 * k - 1] = c * a;
            out[2 * k] = c * b;
        }
    }

    /// Knot span index `i` with `knots[i] <= t < knots[i+1]`, clamped so the
    /// right end point belongs to the last non-degenerate span.
    fn span(&self, t: f64) -> usize {
        let p = self.order - 1;
        let last = self.n_b - 1;
        if t >= self.knots[last + 1] {
            return last;
        }
        if t <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, last + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Values (or derivatives of order `deriv`) of the `order` B-splines that
    /// are nonzero on the span containing `t` (Cox-de Boor with derivative
    /// recursion).
    fn bspline_local(&self, t: f64, deriv: usize) -> (usize, Vec<f64>) {
        let t = t.clamp(self.t0, self.te);
        let p = self.order - 1;
        let span = self.span(t);
        let u = &self.knots;
        // ndu[j][r]: upper triangle holds basis values, lower holds knot differences
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        if deriv == 0 {
            return (span, (0..=p).map(|j| ndu[j][p]).collect());
        }
        let mut ders = vec![0.0; p + 1];
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            let mut d = 0.0;
            for k in 1..=deriv {
                d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p as isize - k as isize;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[(pk + 1) as usize][idx];
                    d += a[s2][j] * ndu[idx][pk as usize];
                }
                if r as isize <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    d += a[s2][k] * ndu[r][pk as usize];
                }
                std::mem::swap(&mut s1, &mut s2);
            }
            if deriv > p {
                d = 0.0;
            }
            ders[r] = d;
        }
        let mut factor = p as f64;
        for k in 2..=deriv {
            factor *= (p + 1 - k) as f64;
        }
        for v in ders.iter_mut() {
            *v *= factor;
        }
        (span, ders)
    }

    /// `H[i][j] = η_j(t_i)`.
    pub fn design_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let mut h = DMatrix::zeros(times.len(), self.n_b);
        let mut row = vec![0.0; self.n_b];
        for (i, &t) in times.iter().enumerate() {
            self.check_t(t)?;
            row.iter_mut().for_each(|v| *v = 0.0);
            self.eval_into(t, 0, &mut row);
            for (j, v) in row.iter().enumerate() {
                h[(i, j)] = *v;
            }
        }
        Ok(h)
    }

    /// `R_ij = ∫ D²η_i D²η_j dt`.
    pub fn roughness_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            BasisKind::Fourier => {
                let omega = 2.0 * std::f64::consts::PI / (self.te - self.t0);
                let mut r = DMatrix::zeros(self.n_b, self.n_b);
                for k in 1..=(self.n_b - 1) / 2 {
                    let v = (k as f64 * omega).powi(4);
                    r[(2 * k - 1, 2 * k - 1)] = v;
                    r[(2 * k, 2 * k)] = v;
                }
                r
            }
            BasisKind::BSpline => self.spline_quadrature(2),
        }
    }

    /// `W_ij = ∫ η_i η_j dt`; the identity for the orthonormal Fourier system.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            BasisKind::Fourier => DMatrix::identity(self.n_b, self.n_b),
            BasisKind::BSpline => self.spline_quadrature(0),
        }
    }

    /// Gauss-Legendre integration of products of `deriv`-th derivatives,
    /// interval by interval between distinct knots.
    fn spline_quadrature(&self, deriv: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_b, self.n_b);
        let p = self.order - 1;
        for span in p..self.n_b {
            let (a, b) = (self.knots[span], self.knots[span + 1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                let t = mid + half * x;
                let (s, vals) = self.bspline_local(t, deriv);
                debug_assert_eq!(s, span);
                let first = span - p;
                for (i, vi) in vals.iter().enumerate() {
                    for (j, vj) in vals.iter().enumerate() {
                        m[(first + i, first + j)] += w * half * vi * vj;
                    }
                }
            }
        }
        m
    }

    /// All three structural matrices at the given sample times.
    pub fn matrices(&self, times: &[f64]) -> Result<BasisMatrices> {
        Ok(BasisMatrices {
            h: self.design_matrix(times)?,
            r: self.roughness_matrix(),
            w: self.gram_matrix(),
        })
    }

    /// Evaluates `η(t)ᵀ c` on `times`.
    pub fn combine(&self, coeffs: &DVector<f64>, times: &[f64]) -> Result<Vec<f64>> {
        let h = self.design_matrix(times)?;
        Ok((h * coeffs).iter().copied().collect())
    }
}

fn check_interval(t0: f64, te: f64) -> Result<()> {
    if !(t0.is_finite() && te.is_finite()) || te <= t0 {
        return Err(invalid(format!("basis interval needs te > t0, got [{t0}, {te}]")));
    }
    Ok(())
}

/// Evaluation, roughness and Gram matrices for one basis and sample set.
#[derive(Debug, Clone)]
pub struct BasisMatrices {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub w: DMatrix<f64>,
}
