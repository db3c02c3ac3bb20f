#![allow(dead_code)]

use peer_core::nets::{LayerShape, ParameterVector};
use peer_core::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    peer_core::seed::rng(&[seed, 0x7E57])
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

pub fn rand_pv(rng: &mut ChaCha8Rng, layout: Vec<LayerShape>, scale: f64) -> ParameterVector {
    let n: usize = layout.iter().map(|s| s.len()).sum();
    let vals = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    ParameterVector::new(layout, vals).unwrap()
}

/// Flat vector as a one-layer parameter vector.
pub fn flat_pv(vals: Vec<f64>) -> ParameterVector {
    let n = vals.len();
    ParameterVector::new(vec![LayerShape { fan_in: 0, fan_out: n }], vals).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let m = a.abs().max(b.abs());
    m == 0.0 || (a - b).abs() <= tol * m
}

/// Elementwise comparison of an analytic gradient against central
/// differences: relative error below `tol` wherever either side exceeds
/// 1e-6 in magnitude, and absolute agreement to 1e-8 elsewhere.
pub fn assert_grad_matches(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len(), "{what}: length");
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        if a.abs().max(n.abs()) > 1e-6 {
            let rel = (a - n).abs() / a.abs().max(n.abs());
            assert!(rel < tol, "{what}[{i}]: analytic {a} vs numeric {n} (rel {rel:e})");
        } else {
            assert!((a - n).abs() < 1e-8, "{what}[{i}]: analytic {a} vs numeric {n}");
        }
    }
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) > 1e-6)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

/// Like [`assert_grad_matches`] but with the relative error measured
/// against `max(|a|, |n|, floor · max_i |n_i|)`, for compositions where
/// tiny coordinates sit at the finite-difference noise level.
pub fn assert_grad_matches_scaled(analytic: &[f64], numeric: &[f64], tol: f64, floor: f64, what: &str) {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())) * floor;
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let denom = a.abs().max(n.abs()).max(scale).max(1e-300);
        let rel = (a - n).abs() / denom;
        assert!(rel < tol, "{what}[{i}]: analytic {a} vs numeric {n} (rel {rel:e})");
    }
}
