//! Single training runs and seed/grid sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use peer_core::nets::ParameterVector;
use peer_core::trainer::{pretrain, run_from, DomainEvaluator, RunOutput};
use peer_core::MlpSpec;

use crate::bench::Benchmark;
use crate::checkpoint;
use crate::config::{DataConfig, RunConfig};
use crate::manifest::Manifest;
use crate::tables;

pub const METRICS_FILE: &str = "metrics.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const WORKERS_ENV: &str = "PEERLAB_WORKERS";

/// Trains one configuration and writes its manifest, metrics and
/// checkpoints into `out`. `init` skips pretraining when given.
pub fn train_run(
    cfg: &RunConfig,
    label: &str,
    bench: &Benchmark,
    init: Option<ParameterVector>,
    out: &Path,
) -> Result<RunOutput> {
    let start = Instant::now();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = Manifest::running(label, cfg);
    manifest.write(out)?;

    let spec = MlpSpec::default();
    let train = &cfg.train;
    let init = match init {
        Some(p) => p,
        None => pretrain(&spec, bench.source(), train)?,
    };
    let eval = DomainEvaluator::new(bench.all());
    let result = run_from(train, &spec, bench.source(), &eval, init)?;

    tables::write_metrics(&out.join(METRICS_FILE), &result.metrics)?;
    let initial = peer_core::Checkpoint {
        spec: spec.clone(),
        params: result.initial.clone(),
        epoch: 0,
        method_tag: format!("{}:initial", train.method.name()),
        seed: train.seed,
    };
    for (name, ckpt) in [
        ("initial.ckpt", &initial),
        ("task.ckpt", &result.task),
        ("proxy.ckpt", &result.proxy),
    ] {
        checkpoint::save(&out.join(name), ckpt)?;
    }
    manifest.status = "complete".into();
    manifest.duration = Some(start.elapsed());
    manifest.files = vec![
        METRICS_FILE.into(),
        "initial.ckpt".into(),
        "task.ckpt".into(),
        "proxy.ckpt".into(),
    ];
    manifest.write(out)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `key=v1,v2,...`.
pub fn parse_grid(s: &str) -> Result<GridAxis> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("grid {s:?}: expected key=v1,v2,..."))?;
    let values: Vec<String> = v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
    if k.trim().is_empty() || values.is_empty() {
        bail!("grid {s:?}: expected key=v1,v2,...");
    }
    Ok(GridAxis {
        key: k.trim().to_string(),
        values,
    })
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| anyhow!("seeds: cannot parse {x:?}")))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        bail!("seeds: at least one seed required");
    }
    Ok(seeds)
}

/// Worker count from the environment; 1 when unset.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("{WORKERS_ENV} must be a positive integer, got {v:?}"),
        },
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub dir_name: String,
    pub assignments: Vec<(String, String)>,
    pub seed: u64,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "=.-_".contains(c) { c } else { '_' })
        .collect()
}

/// Cartesian product of the grid axes (first axis outermost), then seeds.
pub fn expand_cells(base: &RunConfig, grid: &[GridAxis], seeds: &[u64]) -> Vec<Cell> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in grid {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    let mut cells = Vec::new();
    for combo in combos {
        let method = combo
            .iter()
            .rev()
            .find(|(k, _)| k == "method")
            .map(|(_, v)| v.to_uppercase())
            .unwrap_or_else(|| base.train.method.name().to_string());
        let mut label = method;
        for (k, v) in combo.iter().filter(|(k, _)| k != "method" && k != "seed") {
            label.push_str(&format!(" {k}={v}"));
        }
        for &seed in seeds {
            cells.push(Cell {
                dir_name: format!("{}_seed{seed}", slug(&label)),
                label: label.clone(),
                assignments: combo.clone(),
                seed,
            });
        }
    }
    cells
}

#[derive(Debug)]
pub struct SweepSummary {
    pub cells: Vec<Cell>,
    /// (cell directory name, error message), sorted by name.
    pub failures: Vec<(String, String)>,
}

type PretrainKey = (u64, u64, usize, usize, u64, usize);
type PretrainSlot = OnceLock<Result<ParameterVector, String>>;

fn pretrain_key(cfg: &RunConfig) -> PretrainKey {
    let t = &cfg.train;
    (
        t.seed,
        t.lr.to_bits(),
        t.batch_size,
        t.pretrain_epochs,
        cfg.data.seed,
        cfg.data.source_size,
    )
}

/// Runs every cell, at most `workers` at a time. A failing cell is
/// recorded and the rest still run. Cells sharing seed and pretraining
/// settings share one pretraining pass.
pub fn sweep(
    base: &RunConfig,
    grid: &[GridAxis],
    seeds: &[u64],
    data_dir: Option<&Path>,
    out: &Path,
    workers: usize,
) -> Result<SweepSummary> {
    let start = Instant::now();
    fs::create_dir_all(out.join("cells")).with_context(|| format!("creating {}", out.display()))?;
    let cells = expand_cells(base, grid, seeds);
    let mut sweep_manifest = Manifest::running("sweep", base);
    for axis in grid {
        sweep_manifest.config.push_str(&format!("grid = {}={}\n", axis.key, axis.values.join(",")));
    }
    sweep_manifest.config.push_str(&format!(
        "seeds = {}\n",
        seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    ));
    sweep_manifest.write(out)?;

    // Resolve configs and benchmarks up front, in cell order.
    let mut configs: Vec<Result<RunConfig, String>> = Vec::new();
    let mut benches: Vec<(DataConfig, Arc<Benchmark>)> = Vec::new();
    let loaded = data_dir.map(Benchmark::load).transpose()?.map(Arc::new);
    for cell in &cells {
        let mut cfg = base.clone();
        let resolved = (|| {
            for (k, v) in &cell.assignments {
                cfg.set(k, v, &format!("grid {k}")).map_err(|e| e.to_string())?;
            }
            cfg.set("seed", &cell.seed.to_string(), "seeds").map_err(|e| e.to_string())?;
            cfg.clone().finish().map_err(|e| e.to_string())
        })();
        if let (Ok(c), None) = (&resolved, &loaded) {
            if !benches.iter().any(|(d, _)| d == &c.data) {
                benches.push((c.data.clone(), Arc::new(Benchmark::generate(&c.data)?)));
            }
        }
        configs.push(resolved);
    }
    let bench_for = |cfg: &RunConfig| -> Arc<Benchmark> {
        match &loaded {
            Some(b) => b.clone(),
            None => benches.iter().find(|(d, _)| d == &cfg.data).unwrap().1.clone(),
        }
    };

    let pretrained: Mutex<BTreeMap<PretrainKey, Arc<PretrainSlot>>> = Mutex::new(BTreeMap::new());
    let failures: Mutex<Vec<(String, String)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let spec = MlpSpec::default();

    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= cells.len() {
            break;
        }
        let cell = &cells[i];
        let outcome = (|| -> Result<(), String> {
            let cfg = configs[i].as_ref().map_err(Clone::clone)?;
            let bench = bench_for(cfg);
            let slot = pretrained
                .lock()
                .unwrap()
                .entry(pretrain_key(cfg))
                .or_default()
                .clone();
            let init = slot
                .get_or_init(|| pretrain(&spec, bench.source(), &cfg.train).map_err(|e| e.to_string()))
                .clone()?;
            train_run(cfg, &cell.label, &bench, Some(init), &out.join("cells").join(&cell.dir_name))
                .map(|_| ())
                .map_err(|e| format!("{e:#}"))
        })();
        if let Err(e) = outcome {
            failures.lock().unwrap().push((cell.dir_name.clone(), e));
        }
    };
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(cells.len().max(1)) {
            s.spawn(work);
        }
    });

    let mut failures = failures.into_inner().unwrap();
    failures.sort();
    tables::write_rows(
        &out.join(FAILURES_FILE),
        &["cell".to_string(), "error".to_string()],
        &failures.iter().map(|(c, e)| vec![c.clone(), e.clone()]).collect::<Vec<_>>(),
    )?;
    sweep_manifest.status = if failures.is_empty() { "complete" } else { "partial" }.into();
    sweep_manifest.duration = Some(start.elapsed());
    sweep_manifest.files = std::iter::once(FAILURES_FILE.to_string())
        .chain(cells.iter().map(|c| format!("cells/{}", c.dir_name)))
        .collect();
    sweep_manifest.write(out)?;
    Ok(SweepSummary { cells, failures })
}

/// Directories under `root` (inclusive) holding a manifest, sorted.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(crate::manifest::FILE_NAME).is_file() {
            out.push(dir.clone());
        }
        for entry in fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
