use kfdr_demo::{basis_json, bouc_wen_json, duffing_json, smoothing_json};
use serde_json::Value;

fn json<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).unwrap()
}

#[test]
fn bspline_functions_sum_to_one() {
    let v = json(basis_json("bspline", 9, 50).unwrap());
    let f = v["functions"].as_array().unwrap();
    assert_eq!(f.len(), 9);
    for j in 0..50 {
        let s: f64 = f.iter().map(|c| c[j].as_f64().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert!(basis_json("wavelet", 9, 50).is_err());
}

#[test]
fn fourier_count_is_odd() {
    let v = json(basis_json("fourier", 6, 20).unwrap());
    assert_eq!(v["n_b"], 7);
}

#[test]
fn oscillators_start_at_initial_displacement() {
    let d = json(duffing_json(1.0, 2.0, 1.0, -5e-5).unwrap());
    assert_eq!(d["y"][0].as_f64().unwrap(), -5e-5);
    assert_eq!(d["force"][0].as_f64().unwrap(), 1.0);
    let b = json(bouc_wen_json(6e4, 1e5, 5e6, 0.2, 0.01).unwrap());
    assert_eq!(b["y"].as_array().unwrap().len(), 401);
    assert_eq!(b["y"][0].as_f64().unwrap(), 0.01);
}

#[test]
fn smoothing_reports_grid_and_choice() {
    let v = json(smoothing_json(8, 1e-4, 40, true, 3).unwrap());
    let gcv = v["gcv"].as_array().unwrap();
    assert_eq!(gcv.len(), 25);
    let tau = v["tau"].as_f64().unwrap();
    let best = gcv.iter().min_by(|a, b| a[1].as_f64().unwrap().total_cmp(&b[1].as_f64().unwrap())).unwrap();
    assert!((best[0].as_f64().unwrap() - tau.log10()).abs() < 1e-12);
    assert_eq!(v["smooth"].as_array().unwrap().len(), 401);
}
