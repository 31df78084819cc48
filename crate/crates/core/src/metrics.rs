//! Curve error metrics.
//!
//! Two NRMSE variants coexist on purpose: [`nrmse_curve`] is the plain
//! l2-norm form used while choosing the basis size, [`model_nrmse`] is the
//! per-node RMS form used for surrogate test error.

use nalgebra::DMatrix;

use crate::error::{shape, Error, Result};

fn range(y: &[f64]) -> f64 {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// `||y - y_hat||_2 / (max y - min y)`.
pub fn nrmse_curve(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(shape(format!("curve lengths {} and {}", y.len(), y_hat.len())));
    }
    let r = range(y);
    if !(r > 0.0) {
        return Err(Error::Domain("reference curve has zero range".into()));
    }
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss.sqrt() / r)
}

/// Mean over curves of `sqrt(mean_j (y_ij - y_hat_ij)^2) / range(y_i)`.
/// Rows are curves.
pub fn model_nrmse(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != pred.shape() {
        return Err(shape(format!("truth {:?} vs prediction {:?}", truth.shape(), pred.shape())));
    }
    if truth.nrows() == 0 {
        return Err(shape("empty test set"));
    }
    let n_t = truth.ncols() as f64;
    let mut total = 0.0;
    for (yr, pr) in truth.row_iter().zip(pred.row_iter()) {
        let y: Vec<f64> = yr.iter().copied().collect();
        let r = range(&y);
        if !(r > 0.0) {
            return Err(Error::Domain("test curve has zero range".into()));
        }
        let ss: f64 = y.iter().zip(pr.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += (ss / n_t).sqrt() / r;
    }
    Ok(total / truth.nrows() as f64)
}
