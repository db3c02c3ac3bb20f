//! Analysis tools: linear CKA between layer activations, loss barriers along
//! linear interpolation paths, OOD fluctuation, a log-domain Sinkhorn solver
//! and a label-aware entropic OT dataset distance.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::nets::{self, interpolate_params, MlpSpec, ParameterVector};
use crate::synthdata::GlyphDataset;
use crate::tensor::{column_moments, matmul_tn, Tensor};
use crate::trainer::{evaluate_loss, MetricsRecord, ModelRole};

fn center_columns(x: &Tensor) -> Tensor {
    let (mean, _) = column_moments(x);
    let mut out = x.clone();
    for r in 0..x.rows() {
        for (v, m) in out.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    out
}

/// Linear CKA: `‖Ycᵀ Xc‖²_F / (‖Xcᵀ Xc‖_F ‖Ycᵀ Yc‖_F)` on column-centred inputs.
pub fn linear_cka(x: &Tensor, y: &Tensor) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(crate::tensor::shape_err("linear_cka", x, y));
    }
    if x.rows() < 3 {
        return Err(Error::BatchTooSmall {
            op: "linear_cka",
            min: 3,
            got: x.rows(),
        });
    }
    let xc = center_columns(x);
    let yc = center_columns(y);
    let cross = matmul_tn(&yc, &xc)?.frobenius_sq();
    let xx = libm::sqrt(matmul_tn(&xc, &xc)?.frobenius_sq());
    let yy = libm::sqrt(matmul_tn(&yc, &yc)?.frobenius_sq());
    let denom = xx * yy;
    if !(denom > 0.0) {
        return Err(Error::DegenerateFeatures);
    }
    Ok(cross / denom)
}

/// Sentinel stored for entries whose activations were constant.
pub const CKA_DEGENERATE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CkaMatrix {
    pub values: Tensor,
    pub degenerate: Vec<bool>,
}

impl CkaMatrix {
    pub fn size(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn is_degenerate(&self, i: usize, j: usize) -> bool {
        self.degenerate[i * self.values.cols() + j]
    }

    /// Mean of the non-degenerate diagonal entries.
    pub fn mean_diagonal(&self) -> f64 {
        let n = self.values.rows().min(self.values.cols());
        let vals: Vec<f64> = (0..n)
            .filter(|&i| !self.is_degenerate(i, i))
            .map(|i| self.values.get(i, i))
            .collect();
        if vals.is_empty() {
            return CKA_DEGENERATE;
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// CKA between every encoder layer output (hidden layers, then features) of
/// model `a` and of model `b` on a shared probe batch.
pub fn layerwise_cka(
    spec: &MlpSpec,
    params_a: &ParameterVector,
    params_b: &ParameterVector,
    probe: &GlyphDataset,
) -> Result<CkaMatrix> {
    if probe.is_empty() {
        return Err(Error::TooSmall { min: 1, got: 0 });
    }
    let fa = nets::forward(spec, params_a, &probe.x)?;
    let fb = nets::forward(spec, params_b, &probe.x)?;
    let la = fa.cache.layer_activations();
    let lb = fb.cache.layer_activations();
    let mut values = Tensor::zeros(la.len(), lb.len());
    let mut degenerate = vec![false; la.len() * lb.len()];
    for (i, x) in la.iter().enumerate() {
        for (j, y) in lb.iter().enumerate() {
            match linear_cka(x, y) {
                Ok(v) => values.set(i, j, v),
                Err(Error::DegenerateFeatures) => {
                    values.set(i, j, CKA_DEGENERATE);
                    degenerate[i * lb.len() + j] = true;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(CkaMatrix { values, degenerate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierCurve {
    pub alphas: Vec<f64>,
    pub domains: Vec<String>,
    /// `loss[d][i]`: mean cross-entropy on domain `d` at `alphas[i]`.
    pub loss: Vec<Vec<f64>>,
    pub accuracy: Vec<Vec<f64>>,
}

impl BarrierCurve {
    /// Highest interpolated loss minus the worse endpoint loss.
    pub fn barrier_height(&self, domain: usize) -> f64 {
        let l = &self.loss[domain];
        let peak = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        peak - l[0].max(l[l.len() - 1])
    }
}

/// Evaluates `α·θ_a + (1−α)·θ_b` on a uniform α grid including both ends.
pub fn barrier_scan(
    spec: &MlpSpec,
    theta_a: &ParameterVector,
    theta_b: &ParameterVector,
    grid_size: usize,
    datasets: &[&GlyphDataset],
) -> Result<BarrierCurve> {
    theta_a.check_layout(theta_b)?;
    if grid_size < 3 {
        return Err(Error::Range {
            name: "grid_size",
            value: grid_size as f64,
            lo: 3.0,
            hi: f64::INFINITY,
        });
    }
    let alphas: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let mut loss = vec![Vec::with_capacity(grid_size); datasets.len()];
    let mut accuracy = vec![Vec::with_capacity(grid_size); datasets.len()];
    for &alpha in &alphas {
        let params = interpolate_params(theta_a, theta_b, alpha)?;
        for (d, ds) in datasets.iter().enumerate() {
            let (l, a) = evaluate_loss(&params, spec, ds)?;
            loss[d].push(l);
            accuracy[d].push(a);
        }
    }
    Ok(BarrierCurve {
        alphas,
        domains: datasets.iter().map(|d| d.domain.name.clone()).collect(),
        loss,
        accuracy,
    })
}

/// Population variance of a sequence of accuracies given in percentage
/// points.
pub fn fluctuation_pct(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            min: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Fluctuation of one model's accuracy on one domain across all recorded
/// evaluation points, in squared percentage points.
pub fn fluctuation(metrics: &MetricsRecord, domain: usize, role: ModelRole) -> Result<f64> {
    let pct: Vec<f64> = metrics
        .series(domain, role)
        .into_iter()
        .map(|a| 100.0 * a)
        .collect();
    fluctuation_pct(&pct)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    pub plan: Tensor,
    /// `Σ P ⊙ C`, entropy term excluded.
    pub transport_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// L1 violation of the row marginal after the last iteration, before
    /// the returned plan is rounded onto the marginals.
    pub marginal_error: f64,
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(vals.map(|v| libm::exp(v - max)).sum::<f64>())
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Marginal(format!("{name} has negative or NaN entries")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Marginal(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Log-domain Sinkhorn iterations for entropic OT with regularization
/// `reg`. Stops once the row-marginal L1 error drops below `tol`; hitting
/// `max_iter` is reported through `converged`, not as an error. The
/// returned plan is rounded so its marginals hold to rounding error either
/// way.
pub fn sinkhorn(cost: &Tensor, a: &[f64], b: &[f64], reg: f64, max_iter: usize, tol: f64) -> Result<SinkhornResult> {
    let (n, m) = cost.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::Marginal(format!(
            "cost is {n}x{m} but marginals have {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    check_weights("a", a)?;
    check_weights("b", b)?;
    if !(reg > 0.0) {
        return Err(Error::Range {
            name: "reg",
            value: reg,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let log_a: Vec<f64> = a.iter().map(|&v| libm::log(v)).collect();
    let log_b: Vec<f64> = b.iter().map(|&v| libm::log(v)).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    let mut err = f64::INFINITY;

    let row_error = |f: &[f64], g: &[f64], eps: f64| -> f64 {
        (0..n)
            .map(|i| {
                if a[i] == 0.0 {
                    return 0.0;
                }
                let s: f64 = (0..m)
                    .map(|j| libm::exp((f[i] + g[j] - cost.get(i, j)) / eps))
                    .sum();
                (s - a[i]).abs()
            })
            .sum()
    };
    let sweep = |f: &mut [f64], g: &mut [f64], eps: f64| {
        for i in 0..n {
            let lse = logsumexp((0..m).map(|j| (g[j] - cost.get(i, j)) / eps));
            f[i] = if a[i] == 0.0 { f64::NEG_INFINITY } else { eps * (log_a[i] - lse) };
        }
        for j in 0..m {
            let lse = logsumexp((0..n).map(|i| (f[i] - cost.get(i, j)) / eps));
            g[j] = if b[j] == 0.0 { f64::NEG_INFINITY } else { eps * (log_b[j] - lse) };
        }
    };

    // Anneal the regularization from the cost range down to `reg`, halving
    // each stage and warm-starting the duals; at small `reg` plain
    // iterations from zero duals need orders of magnitude more sweeps.
    let (lo, hi) = cost
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut eps = reg;
    let mut stages = 0;
    while eps < hi - lo && stages < 30 {
        eps *= 2.0;
        stages += 1;
    }
    while stages > 0 && iterations < max_iter {
        for _ in 0..ANNEAL_SWEEPS {
            if iterations >= max_iter {
                break;
            }
            sweep(&mut f, &mut g, eps);
            iterations += 1;
        }
        eps *= 0.5;
        stages -= 1;
    }
    let eps = reg;
    let dense_check = n.max(m) <= 16;
    while iterations < max_iter {
        iterations += 1;
        sweep(&mut f, &mut g, eps);
        if iterations % 10 == 0 || iterations == max_iter || dense_check {
            err = row_error(&f, &g, eps);
            if err < tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        err = row_error(&f, &g, eps);
        converged = err < tol;
    }
    let mut plan = Tensor::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let p = libm::exp((f[i] + g[j] - cost.get(i, j)) / reg);
            plan.set(i, j, if p.is_finite() { p } else { 0.0 });
        }
    }
    round_to_marginals(&mut plan, a, b);
    let transport_cost = plan.data().iter().zip(cost.data()).map(|(p, c)| p * c).sum();
    Ok(SinkhornResult {
        plan,
        transport_cost,
        converged,
        iterations,
        marginal_error: err,
    })
}

/// Projects a near-feasible plan onto the transport polytope: scale rows
/// and then columns down to their targets, and spread the leftover mass as
/// a rank-one correction.
fn round_to_marginals(plan: &mut Tensor, a: &[f64], b: &[f64]) {
    let (n, m) = plan.shape();
    for (i, &ai) in a.iter().enumerate() {
        let r: f64 = plan.row(i).iter().sum();
        if r > ai {
            let s = ai / r;
            plan.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        let c: f64 = (0..n).map(|i| plan.get(i, j)).sum();
        if c > bj {
            let s = bj / c;
            for i in 0..n {
                plan.set(i, j, plan.get(i, j) * s);
            }
        }
    }
    let er: Vec<f64> = (0..n).map(|i| a[i] - plan.row(i).iter().sum::<f64>()).collect();
    let ec: Vec<f64> = (0..m).map(|j| b[j] - (0..n).map(|i| plan.get(i, j)).sum::<f64>()).collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan.set(i, j, plan.get(i, j) + er[i] * ec[j] / total);
            }
        }
    }
}

/// Sweeps per annealing stage in [`sinkhorn`].
const ANNEAL_SWEEPS: usize = 20;

/// Solver settings used by [`dataset_distance`].
pub const DISTANCE_MAX_ITER: usize = 2000;
pub const DISTANCE_TOL: f64 = 1e-9;

struct ClassSummary {
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn class_summaries(ds: &GlyphDataset, classes: usize) -> Result<Vec<ClassSummary>> {
    (0..classes)
        .map(|c| {
            let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == c).collect();
            if idx.is_empty() {
                return Err(Error::MissingClass {
                    class: c,
                    dataset: ds.domain.name.clone(),
                });
            }
            let (mean, std) = column_moments(&ds.x.select_rows(&idx));
            Ok(ClassSummary { mean, std })
        })
        .collect()
}

/// Squared 2-Wasserstein distance between diagonal Gaussians.
fn gaussian_label_cost(p: &ClassSummary, q: &ClassSummary) -> f64 {
    let mean: f64 = p.mean.iter().zip(&q.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let cov: f64 = p.std.iter().zip(&q.std).map(|(a, b)| (a - b) * (a - b)).sum();
    mean + cov
}

fn dataset_order(a: &GlyphDataset, b: &GlyphDataset) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.y.cmp(&b.y))
        .then_with(|| {
            a.x.data()
                .iter()
                .map(|v| v.to_bits())
                .cmp(b.x.data().iter().map(|v| v.to_bits()))
        })
}

/// Label-aware OT distance between two labelled datasets.
///
/// Ground cost between samples is the squared pixel distance plus the
/// squared W2 distance between the diagonal-Gaussian summaries of their
/// classes. The plan is solved on the mean-normalized cost with uniform
/// marginals; the reported value is the transport cost in original units.
/// The pair is put into a canonical order first, so the result is exactly
/// symmetric.
pub fn dataset_distance(d_a: &GlyphDataset, d_b: &GlyphDataset, reg: f64) -> Result<f64> {
    if d_a.is_empty() || d_b.is_empty() {
        return Err(Error::TooSmall { min: 1, got: 0 });
    }
    if d_a.x.cols() != d_b.x.cols() {
        return Err(crate::tensor::shape_err("dataset_distance", &d_a.x, &d_b.x));
    }
    let (p, q) = match dataset_order(d_a, d_b) {
        Ordering::Greater => (d_b, d_a),
        _ => (d_a, d_b),
    };
    let classes = p.y.iter().chain(&q.y).copied().max().unwrap_or(0) + 1;
    let sp = class_summaries(p, classes)?;
    let sq = class_summaries(q, classes)?;
    let mut label_cost = Tensor::zeros(classes, classes);
    for (i, s) in sp.iter().enumerate() {
        for (j, t) in sq.iter().enumerate() {
            label_cost.set(i, j, gaussian_label_cost(s, t));
        }
    }
    let (n, m) = (p.len(), q.len());
    let mut cost = Tensor::zeros(n, m);
    for i in 0..n {
        let xi = p.x.row(i);
        for j in 0..m {
            let pix: f64 = xi.iter().zip(q.x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            cost.set(i, j, pix + label_cost.get(p.y[i], q.y[j]));
        }
    }
    let mean_cost = cost.data().iter().sum::<f64>() / (n * m) as f64;
    if mean_cost == 0.0 {
        return Ok(0.0);
    }
    let normalized = cost.scale(1.0 / mean_cost);
    let a = vec![1.0 / n as f64; n];
    let b = vec![1.0 / m as f64; m];
    let sol = sinkhorn(&normalized, &a, &b, reg, DISTANCE_MAX_ITER, DISTANCE_TOL)?;
    Ok(sol.transport_cost * mean_cost)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap_or(Ordering::Equal));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / libm::sqrt(sxx * syy)
}
