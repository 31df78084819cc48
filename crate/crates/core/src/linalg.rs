//! Small dense and banded Cholesky kernels.
//!
//! nalgebra is used for general dense work (products, eigen and singular
//! value decompositions); the two factorizations here are the inner loops of
//! the likelihood search and the smoothing-parameter grid, where avoiding
//! allocation and exploiting band structure pays off.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a dense SPD matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors the row-major symmetric matrix `a` (only the lower triangle
    /// is read). Returns `None` if a pivot is not strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        let mut l = a.to_vec();
        Self::factor_in_place(&mut l, n)?;
        Some(Self { n, l })
    }

    /// Same as [`factor`](Self::factor) but reuses the caller's buffer.
    pub fn factor_owned(mut a: Vec<f64>, n: usize) -> std::result::Result<Self, Vec<f64>> {
        match Self::factor_in_place(&mut a, n) {
            Some(()) => Ok(Self { n, l: a }),
            None => Err(a),
        }
    }

    fn factor_in_place(l: &mut [f64], n: usize) -> Option<()> {
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            // row_j[k] for k < j already holds a[j][k]; finish the row
            for k in 0..j {
                let row_k = &head[k * n..k * n + k];
                let s: f64 = row_k.iter().zip(&row_j[..k]).map(|(a, b)| a * b).sum();
                row_j[k] = (row_j[k] - s) / head[k * n + k];
            }
            let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            row_j[j] = d.sqrt();
            for v in row_j[j + 1..].iter_mut() {
                *v = 0.0;
            }
        }
        Some(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = b[i] / self.l[i * n + i];
            b[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (bk, lk) in b[..i].iter_mut().zip(row) {
                *bk -= lk * xi;
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }
}

/// Cholesky factor of a symmetric positive definite band matrix with
/// half-bandwidth `bw`. Row `i` stores `L[i][i-bw..=i]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factors the band part of `a`; entries outside the band are ignored.
    pub fn factor(a: &DMatrix<f64>, bw: usize) -> Option<Self> {
        let n = a.nrows();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // l[i*w + (k - i + bw)] holds L[i][k] for k in [i-bw, i]
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            for k in k0..=i {
                l[i * w + (k + bw - i)] = a[(i, k)];
            }
        }
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            for k in k0..i {
                // L[i][k] = (a_ik - sum_{j} L[i][j] L[k][j]) / L[k][k]
                let j0 = k0.max(k.saturating_sub(bw));
                let mut s = 0.0;
                for j in j0..k {
                    s += l[i * w + (j + bw - i)] * l[k * w + (j + bw - k)];
                }
                let lkk = l[k * w + bw];
                l[i * w + (k + bw - i)] = (l[i * w + (k + bw - i)] - s) / lkk;
            }
            let mut d = l[i * w + bw];
            for j in k0..i {
                let v = l[i * w + (j + bw - i)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            l[i * w + bw] = d.sqrt();
        }
        Some(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = b[i];
            for k in k0..i {
                s -= self.l[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let xi = b[i] / self.l[i * w + bw];
            b[i] = xi;
            let k0 = i.saturating_sub(bw);
            for k in k0..i {
                b[k] -= self.l[i * w + (k + bw - i)] * xi;
            }
        }
    }

    pub fn log_det(&self) -> f64 {
        let w = self.bw + 1;
        2.0 * (0..self.n).map(|i| self.l[i * w + self.bw].ln()).sum::<f64>()
    }
}

/// Largest `|i - j|` with `|a_ij| > tol * max|a|`.
pub fn bandwidth(a: &DMatrix<f64>, tol: f64) -> usize {
    let cut = tol * a.amax();
    let n = a.nrows();
    let mut bw = 0;
    for j in 0..a.ncols() {
        for i in 0..n {
            if a[(i, j)].abs() > cut {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// Symmetric solve with a jitter ladder: tries the matrix as is, then adds
/// `eps * mean|diag|` to the diagonal for eps in 1e-12, 1e-11, ..., 1e-6.
/// Returns the factor and the jitter actually applied.
pub fn factor_with_jitter(a: &DMatrix<f64>, bw: usize) -> Result<(BandCholesky, f64)> {
    if let Some(f) = BandCholesky::factor(a, bw) {
        return Ok((f, 0.0));
    }
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
    for e in -12..=-6 {
        let jitter = 10f64.powi(e) * scale;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(f) = BandCholesky::factor(&b, bw) {
            log::debug!("symmetric solve needed jitter {jitter:e}");
            return Ok((f, jitter));
        }
    }
    let diag_min = (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min);
    Err(Error::Singular(format!(
        "{n}x{n} system not positive definite after jitter up to 1e-6 (min diagonal {diag_min:e}, mean |diagonal| {scale:e})"
    )))
}
