//! Latin hypercube designs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::RandomSource;

/// `n x p` design with exactly one point per stratum `[k/n, (k+1)/n)` in
/// every dimension, scaled to `bounds`.
pub fn latin_hypercube(
    n: usize,
    bounds: &[(f64, f64)],
    rng: &mut RandomSource,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(invalid("latin hypercube needs n >= 1"));
    }
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(invalid(format!("dimension {d}: need lower < upper, got [{lo}, {hi}]")));
        }
    }
    let p = bounds.len();
    let mut out = DMatrix::zeros(n, p);
    let mut perm: Vec<usize> = (0..n).collect();
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let frac = (stratum as f64 + u) / n as f64;
            // guard against rounding into the next stratum
            let frac = frac.min((stratum as f64 + 1.0) / n as f64 - f64::EPSILON * 4.0);
            out[(i, d)] = lo + frac * (hi - lo);
        }
    }
    Ok(out)
}
