//! Diagnostics over saved checkpoints, datasets and metrics.

use std::path::Path;

use anyhow::{bail, Result};
use peer_core::diagnostics::{barrier_scan, dataset_distance, layerwise_cka, BarrierCurve, CkaMatrix};
use peer_core::synthdata::{apply_policy, AugOp, AugPolicy, DomainSpec, GlyphDataset};
use peer_core::Checkpoint;

use crate::tables::{self, fmt17};

fn same_spec(a: &Checkpoint, b: &Checkpoint) -> Result<()> {
    if a.spec != b.spec {
        bail!("checkpoints have different architectures");
    }
    Ok(())
}

/// Layer-by-layer CKA; row `i` is a layer of `a`, column `j` a layer of `b`.
/// Degenerate entries hold the sentinel value.
pub fn cka(a: &Checkpoint, b: &Checkpoint, probe: &GlyphDataset, out: &Path) -> Result<CkaMatrix> {
    same_spec(a, b)?;
    let m = layerwise_cka(&a.spec, &a.params, &b.params, probe)?;
    let (rows, cols) = m.size();
    let mut header = vec!["layer".to_string()];
    header.extend((0..cols).map(|j| j.to_string()));
    let body: Vec<Vec<String>> = (0..rows)
        .map(|i| {
            let mut r = vec![i.to_string()];
            r.extend((0..cols).map(|j| fmt17(m.values.get(i, j))));
            r
        })
        .collect();
    tables::write_rows(out, &header, &body)?;
    Ok(m)
}

pub fn barrier(
    a: &Checkpoint,
    b: &Checkpoint,
    grid: usize,
    domains: &[&GlyphDataset],
    out: &Path,
) -> Result<BarrierCurve> {
    same_spec(a, b)?;
    let c = barrier_scan(&a.spec, &a.params, &b.params, grid, domains)?;
    let mut body = Vec::new();
    for (i, alpha) in c.alphas.iter().enumerate() {
        for (d, name) in c.domains.iter().enumerate() {
            body.push(vec![fmt17(*alpha), name.clone(), fmt17(c.loss[d][i]), fmt17(c.accuracy[d][i])]);
        }
    }
    let header = ["alpha", "domain", "loss", "accuracy"].map(String::from);
    tables::write_rows(out, &header, &body)?;
    Ok(c)
}

/// Copy of `ds` with pixel noise of magnitude `m`.
pub fn noise_view(ds: &GlyphDataset, m: f64, seed: u64) -> Result<GlyphDataset> {
    let policy = AugPolicy::new(vec![AugOp::Noise], m, seed)?;
    let x = apply_policy(&policy, &ds.x, seed)?;
    Ok(GlyphDataset::new(x, ds.y.clone(), DomainSpec::identity("noisy"))?)
}

/// Distance between `ds` and its noisy view at each magnitude.
pub fn distance(ds: &GlyphDataset, magnitudes: &[f64], reg: f64, seed: u64, out: &Path) -> Result<Vec<f64>> {
    let mut d = Vec::new();
    let mut body = Vec::new();
    for &m in magnitudes {
        let v = dataset_distance(ds, &noise_view(ds, m, seed)?, reg)?;
        body.push(vec![format!("{}~noise", ds.name()), m.to_string(), fmt17(v)]);
        d.push(v);
    }
    let header = ["pair", "magnitude", "distance"].map(String::from);
    tables::write_rows(out, &header, &body)?;
    Ok(d)
}

/// Fluctuation of both models on every domain of one metrics file.
pub fn fluctuation(metrics: &Path, out: &Path) -> Result<Vec<(String, String, f64)>> {
    let rows = tables::read_metrics(metrics)?;
    let mut res = Vec::new();
    for d in tables::metric_domains(&rows) {
        for model in ["task", "proxy"] {
            let pct: Vec<f64> = tables::metric_series(&rows, &d, model).iter().map(|a| 100.0 * a).collect();
            res.push((d.clone(), model.to_string(), peer_core::diagnostics::fluctuation_pct(&pct)?));
        }
    }
    let body: Vec<Vec<String>> = res.iter().map(|(d, m, v)| vec![d.clone(), m.clone(), fmt17(*v)]).collect();
    let header = ["domain", "model", "fluctuation"].map(String::from);
    tables::write_rows(out, &header, &body)?;
    Ok(res)
}
