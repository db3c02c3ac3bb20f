//! Training objectives with analytic gradients: cross-entropy, Barlow Twins,
//! InfoNCE, the task/proxy feature regularizer and the combined proxy loss.
//!
//! Every loss returns a [`LossValue`]: the scalar plus one gradient per input
//! role, each with the shape of the corresponding input.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nets::ProjectionHead;
use crate::tensor::{column_moments, matmul, matmul_nt, matmul_tn, shape_err, Tensor, STANDARDIZE_EPS};

/// Which input a gradient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GradRole {
    Logits,
    ZA,
    ZB,
    HTask,
    HProxy,
    /// Flat projection-head parameters, stored as a `1 × P` tensor.
    ProjParams,
    LogitsX,
    LogitsXbar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grads: BTreeMap<GradRole, Tensor>,
}

impl LossValue {
    fn new(value: f64) -> Self {
        Self {
            value,
            grads: BTreeMap::new(),
        }
    }

    pub fn grad(&self, role: GradRole) -> Option<&Tensor> {
        self.grads.get(&role)
    }

    fn with(mut self, role: GradRole, g: Tensor) -> Self {
        self.grads.insert(role, g);
        self
    }
}

/// MI surrogate used by the feature regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    BarlowTwins,
    InfoNce,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::BarlowTwins => "BT",
            Objective::InfoNce => "InfoNCE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "BT" | "bt" | "barlow_twins" => Ok(Objective::BarlowTwins),
            "InfoNCE" | "infonce" | "info_nce" => Ok(Objective::InfoNce),
            other => Err(Error::Config(format!("unknown objective {other:?}"))),
        }
    }
}

fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
    row.iter().map(|v| v - lse).collect()
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`).
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossValue> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape {
            op: "cross_entropy",
            left_rows: n,
            left_cols: c,
            right_rows: labels.len(),
            right_cols: 1,
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Label { label, classes: c });
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(n, c);
    let inv_n = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        let lsm = log_softmax_row(logits.row(i));
        loss -= lsm[y];
        for (g, l) in grad.row_mut(i).iter_mut().zip(&lsm) {
            *g = libm::exp(*l) * inv_n;
        }
        grad.row_mut(i)[y] -= inv_n;
    }
    Ok(LossValue::new(loss * inv_n).with(GradRole::Logits, grad))
}

struct Standardized {
    z: Tensor,
    centered: Tensor,
    std: Vec<f64>,
}

fn standardize(z: &Tensor) -> Standardized {
    let (mean, std) = column_moments(z);
    let mut centered = z.clone();
    let mut zh = z.clone();
    for r in 0..z.rows() {
        for c in 0..z.cols() {
            let v = z.get(r, c) - mean[c];
            centered.set(r, c, v);
            zh.set(r, c, v / (std[c] + STANDARDIZE_EPS));
        }
    }
    Standardized {
        z: zh,
        centered,
        std,
    }
}

/// Pulls a gradient w.r.t. the standardized batch back to the raw batch,
/// differentiating through both the mean and the standard deviation.
fn standardize_backward(s: &Standardized, g: &Tensor) -> Tensor {
    let (n, d) = g.shape();
    let nf = n as f64;
    let mut out = Tensor::zeros(n, d);
    for c in 0..d {
        let denom = s.std[c] + STANDARDIZE_EPS;
        let mut gsum = 0.0;
        let mut gc = 0.0;
        for r in 0..n {
            gsum += g.get(r, c);
            gc += g.get(r, c) * s.centered.get(r, c);
        }
        let gmean = gsum / nf;
        let std_term = if s.std[c] > 0.0 {
            gc / (denom * denom * nf * s.std[c])
        } else {
            0.0
        };
        for r in 0..n {
            out.set(r, c, (g.get(r, c) - gmean) / denom - std_term * s.centered.get(r, c));
        }
    }
    out
}

fn check_pair(op: &'static str, a: &Tensor, b: &Tensor, min_rows: usize) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(op, a, b));
    }
    if a.rows() < min_rows {
        return Err(Error::BatchTooSmall {
            op,
            min: min_rows,
            got: a.rows(),
        });
    }
    Ok(())
}

/// `M = Ẑ_aᵀ Ẑ_b / N` on column-standardized batches.
pub fn cross_correlation(z_a: &Tensor, z_b: &Tensor) -> Result<Tensor> {
    check_pair("cross_correlation", z_a, z_b, 2)?;
    let a = standardize(z_a);
    let b = standardize(z_b);
    Ok(matmul_tn(&a.z, &b.z)?.scale(1.0 / z_a.rows() as f64))
}

/// `Σᵢ(1 − Mᵢᵢ)² + λ Σᵢ Σ_{j≠i} Mᵢⱼ²`, gradients through the standardization.
pub fn barlow_twins(z_a: &Tensor, z_b: &Tensor, lambda: f64) -> Result<LossValue> {
    check_pair("barlow_twins", z_a, z_b, 2)?;
    if !(lambda >= 0.0) {
        return Err(Error::Range {
            name: "lambda",
            value: lambda,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let n = z_a.rows() as f64;
    let d = z_a.cols();
    let a = standardize(z_a);
    let b = standardize(z_b);
    let m = matmul_tn(&a.z, &b.z)?.scale(1.0 / n);
    let mut loss = 0.0;
    let mut dm = Tensor::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let v = m.get(i, j);
            if i == j {
                loss += (1.0 - v) * (1.0 - v);
                dm.set(i, j, -2.0 * (1.0 - v));
            } else {
                loss += lambda * v * v;
                dm.set(i, j, 2.0 * lambda * v);
            }
        }
    }
    // dL/dẐ_a = Ẑ_b dMᵀ / N, dL/dẐ_b = Ẑ_a dM / N
    let ga = matmul_nt(&b.z, &dm)?.scale(1.0 / n);
    let gb = matmul(&a.z, &dm)?.scale(1.0 / n);
    Ok(LossValue::new(loss)
        .with(GradRole::ZA, standardize_backward(&a, &ga))
        .with(GradRole::ZB, standardize_backward(&b, &gb)))
}

fn unit_rows(z: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    let mut out = z.clone();
    let mut norms = Vec::with_capacity(z.rows());
    for r in 0..z.rows() {
        let norm = libm::sqrt(z.row(r).iter().map(|v| v * v).sum::<f64>());
        if !(norm > 0.0) {
            return Err(Error::DegenerateRow { row: r });
        }
        for v in out.row_mut(r) {
            *v /= norm;
        }
        norms.push(norm);
    }
    Ok((out, norms))
}

/// InfoNCE with cosine similarity and temperature `tau`; row `i` of `z_b` is
/// the positive for row `i` of `z_a`, every row of `z_b` is in the
/// denominator.
pub fn info_nce(z_a: &Tensor, z_b: &Tensor, tau: f64) -> Result<LossValue> {
    check_pair("info_nce", z_a, z_b, 1)?;
    if !(tau > 0.0) {
        return Err(Error::Range {
            name: "tau",
            value: tau,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let n = z_a.rows();
    let (ua, na) = unit_rows(z_a)?;
    let (ub, nb) = unit_rows(z_b)?;
    let cos = matmul_nt(&ua, &ub)?;
    let mut loss = 0.0;
    // gs = dL/dS where S = cos / tau
    let mut gs = Tensor::zeros(n, n);
    for i in 0..n {
        let s: Vec<f64> = cos.row(i).iter().map(|c| c / tau).collect();
        let lsm = log_softmax_row(&s);
        loss -= lsm[i];
        for (k, l) in lsm.iter().enumerate() {
            let p = libm::exp(*l);
            gs.set(i, k, (p - if k == i { 1.0 } else { 0.0 }) / n as f64);
        }
    }
    let gc = gs.scale(1.0 / tau);
    // d cos(a_i, b_k) / d a_i = (b̂_k − cos_ik â_i) / |a_i|
    let mut ga = matmul(&gc, &ub)?;
    for i in 0..n {
        let w: f64 = (0..n).map(|k| gc.get(i, k) * cos.get(i, k)).sum();
        for (c, v) in ga.row_mut(i).iter_mut().enumerate() {
            *v = (*v - w * ua.get(i, c)) / na[i];
        }
    }
    let mut gb = matmul_tn(&gc, &ua)?;
    for k in 0..n {
        let w: f64 = (0..n).map(|i| gc.get(i, k) * cos.get(i, k)).sum();
        for (c, v) in gb.row_mut(k).iter_mut().enumerate() {
            *v = (*v - w * ub.get(k, c)) / nb[k];
        }
    }
    Ok(LossValue::new(loss / n as f64)
        .with(GradRole::ZA, ga)
        .with(GradRole::ZB, gb))
}

/// Negative-MI surrogate between projected task features (frozen) and
/// projected proxy features, both through the same head.
///
/// The returned gradients cover the proxy features and the head parameters;
/// the task-feature gradient is present and identically zero.
pub fn peer_regularizer(
    h_task: &Tensor,
    h_proxy: &Tensor,
    head: &ProjectionHead<'_>,
    objective: Objective,
    lambda_or_tau: f64,
) -> Result<LossValue> {
    if h_task.shape() != h_proxy.shape() {
        return Err(shape_err("peer_regularizer", h_task, h_proxy));
    }
    let task = head.forward(h_task)?;
    let proxy = head.forward(h_proxy)?;
    let inner = match objective {
        Objective::BarlowTwins => barlow_twins(&task.projections, &proxy.projections, lambda_or_tau)?,
        Objective::InfoNce => info_nce(&task.projections, &proxy.projections, lambda_or_tau)?,
    };
    let (_, head_from_task) = head.backward(&task, &inner.grads[&GradRole::ZA])?;
    let (g_proxy, head_from_proxy) = head.backward(&proxy, &inner.grads[&GradRole::ZB])?;
    let head_grad: Vec<f64> = head_from_task
        .iter()
        .zip(&head_from_proxy)
        .map(|(a, b)| a + b)
        .collect();
    let p = head_grad.len();
    Ok(LossValue::new(inner.value)
        .with(GradRole::HTask, Tensor::zeros(h_task.rows(), h_task.cols()))
        .with(GradRole::HProxy, g_proxy)
        .with(GradRole::ProjParams, Tensor::from_vec(1, p, head_grad)?))
}

/// `CE(logits_x) + CE(logits_xbar) + w · reg`.
pub fn proxy_objective(
    logits_x: &Tensor,
    logits_xbar: &Tensor,
    labels: &[usize],
    reg: &LossValue,
    w: f64,
) -> Result<LossValue> {
    if !(w >= 0.0) {
        return Err(Error::Range {
            name: "w",
            value: w,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let ce_x = cross_entropy(logits_x, labels)?;
    let ce_xbar = cross_entropy(logits_xbar, labels)?;
    let mut out = LossValue::new(ce_x.value + ce_xbar.value + w * reg.value)
        .with(GradRole::LogitsX, ce_x.grads[&GradRole::Logits].clone())
        .with(GradRole::LogitsXbar, ce_xbar.grads[&GradRole::Logits].clone());
    for (role, g) in &reg.grads {
        out.grads.insert(*role, g.scale(w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ce_uniform_logits() {
        let l = cross_entropy(&Tensor::zeros(3, 4), &[0, 1, 3]).unwrap();
        assert!((l.value - libm::log(4.0)).abs() < 1e-12);
    }

    #[test]
    fn ce_saturates() {
        let logits = Tensor::from_rows(&[&[50.0, 0.0, 0.0]]);
        assert!(cross_entropy(&logits, &[0]).unwrap().value < 1e-20);
    }

    #[test]
    fn ce_label_error() {
        assert_eq!(
            cross_entropy(&Tensor::zeros(1, 3), &[3]).unwrap_err(),
            Error::Label { label: 3, classes: 3 }
        );
    }

    #[test]
    fn bt_d1_anticorrelated_is_four() {
        let z = Tensor::from_rows(&[&[1.0], &[-2.0], &[0.5], &[3.0]]);
        let l = barlow_twins(&z, &z.scale(-1.0), 0.005).unwrap();
        // The eps guard shrinks |M| to σ²/(σ+eps)².
        let (_, std) = column_moments(&z);
        let m = std[0] * std[0] / ((std[0] + STANDARDIZE_EPS) * (std[0] + STANDARDIZE_EPS));
        assert!((l.value - (1.0 + m) * (1.0 + m)).abs() < 1e-12);
        assert!((l.value - 4.0).abs() < 1e-6, "{}", l.value);
    }

    #[test]
    fn bt_zero_on_identity_correlation() {
        // Columns ±1 with zero mean and orthogonal: M = I exactly.
        let z = Tensor::from_rows(&[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]]);
        let l = barlow_twins(&z, &z, 0.005).unwrap();
        assert!(l.value < 1e-12, "{}", l.value);
    }

    #[test]
    fn info_nce_single_row_is_zero() {
        let a = Tensor::from_rows(&[&[0.3, -1.0, 2.0]]);
        let b = Tensor::from_rows(&[&[1.0, 0.2, 0.1]]);
        assert_eq!(info_nce(&a, &b, 0.1).unwrap().value, 0.0);
    }

    #[test]
    fn info_nce_zero_row() {
        let a = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(
            info_nce(&a, &a, 0.1).unwrap_err(),
            Error::DegenerateRow { row: 1 }
        );
    }

    #[test]
    fn objective_parse() {
        assert_eq!(Objective::parse("BT").unwrap(), Objective::BarlowTwins);
        assert_eq!(Objective::parse("InfoNCE").unwrap(), Objective::InfoNce);
        assert!(matches!(Objective::parse("MINE"), Err(Error::Config(_))));
    }
}
