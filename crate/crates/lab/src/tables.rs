//! CSV files: datasets, per-run metrics and report tables.

use std::path::Path;

use anyhow::{bail, Context, Result};
use peer_core::synthdata::{DomainSpec, GlyphDataset, PIXELS};
use peer_core::trainer::{MetricsRecord, ModelRole};
use peer_core::Tensor;

pub const METRICS_HEADER: [&str; 6] = ["epoch", "domain", "model", "accuracy", "ce_loss", "reg_loss"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset(path: &Path, ds: &GlyphDataset) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..PIXELS).map(|p| format!("p{p}")));
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.y[i].to_string()];
        rec.extend(ds.x.row(i).iter().map(|&v| fmt17(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path, domain: DomainSpec) -> Result<GlyphDataset> {
    let mut r = reader(path)?;
    let cols = r.headers()?.len();
    if cols != PIXELS + 1 {
        bail!("{}: expected {} columns, found {cols}", path.display(), PIXELS + 1);
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        y.push(rec[0].parse().with_context(|| format!("{} row {}: label", path.display(), i + 2))?);
        for f in rec.iter().skip(1) {
            x.push(f.parse::<f64>().with_context(|| format!("{} row {}: pixel {f:?}", path.display(), i + 2))?);
        }
    }
    let n = y.len();
    Ok(GlyphDataset::new(Tensor::from_vec(n, PIXELS, x)?, y, domain)?)
}

pub fn write_metrics(path: &Path, m: &MetricsRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(METRICS_HEADER)?;
    for p in &m.points {
        for (d, name) in m.domains.iter().enumerate() {
            for (role, acc) in [(ModelRole::Task, &p.task_acc), (ModelRole::Proxy, &p.proxy_acc)] {
                w.write_record([
                    p.epoch.to_string(),
                    name.clone(),
                    role.name().to_string(),
                    acc[d].to_string(),
                    p.ce_loss.to_string(),
                    p.reg_loss.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub domain: String,
    pub model: String,
    pub accuracy: f64,
    pub ce_loss: f64,
    pub reg_loss: f64,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != METRICS_HEADER {
        bail!("{}: unexpected header {header:?}", path.display());
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), i + 2);
        rows.push(MetricRow {
            epoch: rec[0].parse().with_context(ctx)?,
            domain: rec[1].to_string(),
            model: rec[2].to_string(),
            accuracy: rec[3].parse().with_context(ctx)?,
            ce_loss: rec[4].parse().with_context(ctx)?,
            reg_loss: rec[5].parse().with_context(ctx)?,
        });
    }
    Ok(rows)
}

/// Domains in first-appearance order.
pub fn metric_domains(rows: &[MetricRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.domain) {
            out.push(r.domain.clone());
        }
    }
    out
}

/// Accuracy series of one model on one domain, in epoch order.
pub fn metric_series(rows: &[MetricRow], domain: &str, model: &str) -> Vec<f64> {
    let mut pts: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.domain == domain && r.model == model)
        .map(|r| (r.epoch, r.accuracy))
        .collect();
    pts.sort_by_key(|p| p.0);
    pts.into_iter().map(|p| p.1).collect()
}

pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of an arbitrary CSV file.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = reader(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}
