//! Aggregation of finished runs into accuracy and fluctuation tables.

use std::cmp::Ordering;
use std::path::Path;

use anyhow::{bail, Context, Result};
use peer_core::diagnostics::fluctuation_pct;
use peer_core::trainer::Method;

use crate::manifest;
use crate::run::{find_runs, METRICS_FILE};
use crate::tables;

pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const FLUCTUATION_FILE: &str = "fluctuation.csv";
pub const RUNS_FILE: &str = "runs.csv";

/// Final accuracy and fluctuation of the reported model of one run, per
/// domain, in percent (fluctuation in squared percentage points).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub method: Method,
    pub seed: u64,
    pub domains: Vec<String>,
    pub accuracy: Vec<f64>,
    pub fluctuation: Vec<f64>,
}

impl RunSummary {
    /// Mean over the target domains (all but the first).
    pub fn target_mean(values: &[f64]) -> f64 {
        let t = &values[1..];
        t.iter().sum::<f64>() / t.len() as f64
    }

    pub fn mean_accuracy(&self) -> f64 {
        Self::target_mean(&self.accuracy)
    }

    pub fn mean_fluctuation(&self) -> f64 {
        Self::target_mean(&self.fluctuation)
    }
}

/// Summarizes a finished run directory; `None` for anything that is not a
/// complete single run (sweep roots, interrupted runs).
pub fn summarize(dir: &Path) -> Result<Option<RunSummary>> {
    let m = manifest::read(&dir.join(manifest::FILE_NAME))?;
    let is_run = m.get("file").is_some_and(|f| f.iter().any(|f| f == METRICS_FILE));
    if manifest::first(&m, "status") != Some("complete") || !is_run {
        return Ok(None);
    }
    let field = |k: &str| {
        manifest::first(&m, k).with_context(|| format!("{}: manifest lacks {k}", dir.display()))
    };
    let method = Method::parse(field("method")?)?;
    let seed: u64 = field("seed")?.parse().with_context(|| format!("{}: seed", dir.display()))?;
    let label = field("label")?.to_string();
    let rows = tables::read_metrics(&dir.join(METRICS_FILE))?;
    let domains = tables::metric_domains(&rows);
    if domains.len() < 2 {
        bail!("{}: metrics need a source and at least one target", dir.display());
    }
    let model = method.reported_model().name();
    let mut accuracy = Vec::new();
    let mut fluctuation = Vec::new();
    for d in &domains {
        let pct: Vec<f64> = tables::metric_series(&rows, d, model).iter().map(|a| 100.0 * a).collect();
        let Some(&last) = pct.last() else {
            bail!("{}: no {model} rows for {d}", dir.display());
        };
        accuracy.push(last);
        fluctuation.push(fluctuation_pct(&pct)?);
    }
    Ok(Some(RunSummary {
        label,
        method,
        seed,
        domains,
        accuracy,
        fluctuation,
    }))
}

/// Orders labels like `PEER w=2` by method, then key, then value, with
/// numeric values compared as numbers.
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    let mut ta = a.split(' ');
    let mut tb = b.split(' ');
    loop {
        match (ta.next(), tb.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => {
                let (kx, vx) = x.split_once('=').unwrap_or((x, ""));
                let (ky, vy) = y.split_once('=').unwrap_or((y, ""));
                let by_value = match (vx.parse::<f64>(), vy.parse::<f64>()) {
                    (Ok(p), Ok(q)) => p.total_cmp(&q),
                    _ => vx.cmp(vy),
                };
                let o = kx.cmp(ky).then(by_value).then(x.cmp(y));
                if o != Ordering::Equal {
                    return o;
                }
            }
        }
    }
}

/// Every complete run below `root`, sorted by (label, seed).
pub fn collect(root: &Path) -> Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for dir in find_runs(root)? {
        if let Some(s) = summarize(&dir)? {
            out.push(s);
        }
    }
    out.sort_by(|a, b| compare_labels(&a.label, &b.label).then(a.seed.cmp(&b.seed)));
    Ok(out)
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Writes accuracy, fluctuation and per-run tables into `out`. Returns the
/// file names written.
pub fn write_report(input: &Path, out: &Path) -> Result<Vec<String>> {
    let runs = collect(input)?;
    let Some(first) = runs.first() else {
        bail!("no complete runs under {}", input.display());
    };
    let domains = first.domains.clone();
    if let Some(r) = runs.iter().find(|r| r.domains != domains) {
        bail!("run {} seed {} has domains {:?}, expected {domains:?}", r.label, r.seed, r.domains);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    // `runs` is already in label order, so grouping by adjacency keeps it.
    let mut groups: Vec<(&str, Vec<&RunSummary>)> = Vec::new();
    for r in &runs {
        match groups.last_mut() {
            Some((l, g)) if *l == r.label => g.push(r),
            _ => groups.push((&r.label, vec![r])),
        }
    }
    let header = |first: &[&str]| -> Vec<String> {
        first
            .iter()
            .map(|s| s.to_string())
            .chain(domains.iter().cloned())
            .chain(std::iter::once("mean".to_string()))
            .collect()
    };
    let table = |pick: fn(&RunSummary) -> &[f64]| -> Vec<Vec<String>> {
        groups
            .iter()
            .map(|(label, rs)| {
                let per_domain: Vec<f64> = (0..domains.len())
                    .map(|d| rs.iter().map(|r| pick(r)[d]).sum::<f64>() / rs.len() as f64)
                    .collect();
                let mut row = vec![label.to_string()];
                row.extend(per_domain.iter().map(|&v| fmt(v)));
                row.push(fmt(RunSummary::target_mean(&per_domain)));
                row
            })
            .collect()
    };
    tables::write_rows(&out.join(ACCURACY_FILE), &header(&["method"]), &table(|r| &r.accuracy))?;
    tables::write_rows(&out.join(FLUCTUATION_FILE), &header(&["method"]), &table(|r| &r.fluctuation))?;

    let mut per_run = Vec::new();
    for r in &runs {
        for (metric, vals) in [("accuracy", &r.accuracy), ("fluctuation", &r.fluctuation)] {
            let mut row = vec![r.label.clone(), r.seed.to_string(), metric.to_string()];
            row.extend(vals.iter().map(|&v| fmt(v)));
            row.push(fmt(RunSummary::target_mean(vals)));
            per_run.push(row);
        }
    }
    tables::write_rows(&out.join(RUNS_FILE), &header(&["method", "seed", "metric"]), &per_run)?;
    Ok(vec![ACCURACY_FILE.into(), FLUCTUATION_FILE.into(), RUNS_FILE.into()])
}
