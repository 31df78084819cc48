//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on a
//! canvas. The plain `*_json` functions are the same operations without
//! the wasm-bindgen error wrapper, so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use kfdr::basis::{BasisKind, BasisSystem};
use kfdr::bench::{generate_dataset, BoucWen, Benchmark, Duffing};
use kfdr::ensemble::center_ensemble;
use kfdr::smoothing::{basis_for, select_tau_with, GcvCount, PenalizedLs};
use kfdr::{RandomSource, TimeGrid};

#[derive(Serialize)]
struct BasisView {
    t: Vec<f64>,
    /// one curve per basis function
    functions: Vec<Vec<f64>>,
    n_b: usize,
}

#[derive(Serialize)]
struct ResponseView {
    t: Vec<f64>,
    y: Vec<f64>,
    force: Vec<f64>,
}

#[derive(Serialize)]
struct SmoothingView {
    t: Vec<f64>,
    /// first noisy curve, with the ensemble mean added back
    noisy: Vec<f64>,
    smooth: Vec<f64>,
    clean: Vec<f64>,
    /// `(log10 τ, log10 GCV)`
    gcv: Vec<(f64, f64)>,
    tau: f64,
    n_b: usize,
}

fn to_js<T: Serialize>(r: kfdr::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

fn parse_kind(kind: &str) -> kfdr::Result<BasisKind> {
    match kind {
        "fourier" => Ok(BasisKind::Fourier),
        "bspline" | "b-spline" => Ok(BasisKind::BSpline),
        other => Err(kfdr::Error::InvalidArgument(format!("unknown basis kind '{other}'"))),
    }
}

pub fn basis_json(kind: &str, n_b: usize, n_points: usize) -> kfdr::Result<impl Serialize> {
    let basis = basis_for(parse_kind(kind)?, n_b, 4, 0.0, 1.0)?;
    let t = TimeGrid::new(0.0, 1.0, n_points.max(2))?.nodes();
    let h = basis.design_matrix(&t)?;
    let functions = (0..h.ncols()).map(|k| h.column(k).iter().copied().collect()).collect();
    Ok(BasisView { t, functions, n_b: basis.len() })
}

pub fn duffing_json(alpha: f64, beta: f64, c: f64, y0: f64) -> kfdr::Result<impl Serialize> {
    let d = Duffing::default();
    let t = d.grid.nodes();
    let force = t.iter().map(|&s| Duffing::excitation(alpha, beta, s)).collect();
    Ok(ResponseView { y: d.response(&[alpha, beta, c, y0])?, t, force })
}

pub fn bouc_wen_json(m: f64, c: f64, k: f64, alpha: f64, y0: f64) -> kfdr::Result<impl Serialize> {
    let bw = BoucWen::new(BoucWen::default_vartheta(), 2)?;
    let t = bw.grid.nodes();
    let force = t.iter().map(|&s| bw.excitation(m, s)).collect();
    Ok(ResponseView { y: bw.response(&[m, c, k, alpha, y0])?, t, force })
}

/// Noisy Duffing ensemble smoothed on a cubic B-spline basis with the GCV
/// grid search (`count_nodes` switches the GCV prefactor to samples per
/// curve).
pub fn smoothing_json(n_curves: usize, noise: f64, n_b: usize, count_nodes: bool, seed: u64) -> kfdr::Result<impl Serialize> {
    let bench = Benchmark::duffing();
    let rng = RandomSource::new(seed);
    let clean = generate_dataset(&bench, n_curves.max(2), &mut rng.derive("demo"), 0.0)?;
    let mut noisy = clean.clone();
    kfdr::bench::add_noise(&mut noisy.responses, noise, &mut rng.derive("noise"))?;
    let (mean, centered) = center_ensemble(&noisy.responses)?;
    let t = noisy.grid.nodes();
    let basis = BasisSystem::bspline(n_b.max(4), 4, t[0], t[t.len() - 1])?;
    let h = basis.design_matrix(&t)?;
    let r = basis.roughness_matrix();
    let count = if count_nodes { GcvCount::Nodes } else { GcvCount::Curves };
    let problem = PenalizedLs::new(&h, &r, &centered)?.with_gcv_count(count);
    let sel = select_tau_with(&problem, 25)?;
    let fit = problem.fit(sel.tau)?;
    let smooth = (&h * fit.coeffs.column(0)).iter().zip(mean.iter()).map(|(a, b)| a + b).collect();
    Ok(SmoothingView {
        noisy: noisy.curve(0),
        clean: clean.curve(0),
        smooth,
        gcv: sel.scores.iter().map(|&(tau, g)| (tau.log10(), g.max(f64::MIN_POSITIVE).log10())).collect(),
        tau: sel.tau,
        n_b: basis.len(),
        t,
    })
}

#[wasm_bindgen]
pub fn basis(kind: &str, n_b: usize, n_points: usize) -> Result<String, JsError> {
    to_js(basis_json(kind, n_b, n_points))
}

#[wasm_bindgen]
pub fn duffing(alpha: f64, beta: f64, c: f64, y0: f64) -> Result<String, JsError> {
    to_js(duffing_json(alpha, beta, c, y0))
}

#[wasm_bindgen]
pub fn bouc_wen(m: f64, c: f64, k: f64, alpha: f64, y0: f64) -> Result<String, JsError> {
    to_js(bouc_wen_json(m, c, k, alpha, y0))
}

#[wasm_bindgen]
pub fn smoothing(n_curves: usize, noise: f64, n_b: usize, count_nodes: bool, seed: u64) -> Result<String, JsError> {
    to_js(smoothing_json(n_curves, noise, n_b, count_nodes, seed))
}
