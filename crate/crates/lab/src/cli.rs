//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analyze;
use crate::bench::Benchmark;
use crate::checkpoint;
use crate::config::{parse_config, DataConfig, RunConfig};
use crate::manifest::Manifest;
use crate::report;
use crate::run::{self, parse_grid, parse_seeds, workers_from_env};

#[derive(Debug, Parser)]
#[command(name = "peerlab", version, about = "Proxy/task averaging experiments on a synthetic glyph benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the benchmark domains as CSV files.
    GenerateData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        source_size: Option<usize>,
        #[arg(long)]
        target_size: Option<usize>,
    },
    /// Train one configuration.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Benchmark directory from generate-data; generated in memory if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every grid cell for every seed.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// `key=v1,v2,...`; repeat for a product grid.
        #[arg(long)]
        grid: Vec<String>,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnostics over checkpoints and metrics.
    #[command(subcommand)]
    Analyze(Analysis),
    /// Aggregate finished runs into accuracy and fluctuation tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct DataSource {
    /// Benchmark directory; the default benchmark is generated if absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

impl DataSource {
    fn load(&self) -> Result<Benchmark> {
        match &self.data {
            Some(d) => Benchmark::load(d),
            None => Benchmark::generate(&DataConfig {
                seed: self.data_seed,
                ..DataConfig::default()
            }),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Layerwise CKA between two checkpoints.
    Cka {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        data: DataSource,
        /// Domain whose samples feed both networks.
        #[arg(long, default_value = "source")]
        probe: String,
        #[arg(long, default_value_t = 512)]
        probe_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Loss and accuracy along the segment between two checkpoints.
    Barrier {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        data: DataSource,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset distance between a domain and noisy views of it.
    Distance {
        #[command(flatten)]
        data: DataSource,
        #[arg(long, default_value = "source")]
        domain: String,
        #[arg(long, default_value = "0.1,0.4,0.7,1.0")]
        magnitudes: String,
        #[arg(long, default_value_t = 1e-2)]
        reg: f64,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fluctuation of both models on every domain of a metrics file.
    Fluctuation {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Per-key overrides applied after the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub pretrain_epochs: Option<String>,
    #[arg(long)]
    pub eval_every: Option<String>,
    #[arg(long)]
    pub data_seed: Option<String>,
    #[arg(long)]
    pub source_size: Option<String>,
    #[arg(long)]
    pub target_size: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("method", &self.method),
            ("epochs", &self.epochs),
            ("k", &self.k),
            ("w", &self.w),
            ("lambda", &self.lambda),
            ("tau", &self.tau),
            ("objective", &self.objective),
            ("lr", &self.lr),
            ("batch_size", &self.batch_size),
            ("seed", &self.seed),
            ("pretrain_epochs", &self.pretrain_epochs),
            ("eval_every", &self.eval_every),
            ("data_seed", &self.data_seed),
            ("source_size", &self.source_size),
            ("target_size", &self.target_size),
        ]
    }
}

/// Config file (if any), then flags.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text, &p.display().to_string())?
        }
        None => RunConfig::default(),
    };
    for (key, value) in overrides.pairs() {
        if let Some(v) = value {
            cfg.set(key, v, &format!("flag --{}", key.replace('_', "-")))?;
        }
    }
    Ok(cfg)
}

fn bench_for(data: Option<&Path>, cfg: &RunConfig) -> Result<Benchmark> {
    match data {
        Some(d) => Benchmark::load(d),
        None => Benchmark::generate(&cfg.data),
    }
}

fn load_pair(a: &Path, b: &Path) -> Result<(peer_core::Checkpoint, peer_core::Checkpoint)> {
    Ok((checkpoint::load(a)?, checkpoint::load(b)?))
}

fn parent_dir(out: &Path) -> Result<()> {
    if let Some(p) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData {
            out,
            seed,
            source_size,
            target_size,
        } => {
            let start = Instant::now();
            let mut cfg = RunConfig::default();
            cfg.set("data_seed", &seed.to_string(), "flag --seed")?;
            if let Some(n) = source_size {
                cfg.set("source_size", &n.to_string(), "flag --source-size")?;
            }
            if let Some(n) = target_size {
                cfg.set("target_size", &n.to_string(), "flag --target-size")?;
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut m = Manifest::running("generate-data", &cfg);
            m.write(&out)?;
            m.files = Benchmark::generate(&cfg.data)?.save(&out)?;
            m.status = "complete".into();
            m.duration = Some(start.elapsed());
            m.write(&out)
        }
        Command::Train {
            config,
            overrides,
            data,
            out,
        } => {
            let cfg = load_config(config.as_deref(), &overrides)?.finish()?;
            let bench = bench_for(data.as_deref(), &cfg)?;
            run::train_run(&cfg, cfg.train.method.name(), &bench, None, &out)?;
            Ok(())
        }
        Command::Sweep {
            config,
            overrides,
            grid,
            seeds,
            data,
            out,
        } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let grid = grid.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>>>()?;
            let seeds = parse_seeds(&seeds)?;
            let workers = workers_from_env()?;
            let summary = run::sweep(&cfg, &grid, &seeds, data.as_deref(), &out, workers)?;
            if !summary.failures.is_empty() {
                let list: Vec<String> = summary.failures.iter().map(|(c, e)| format!("  {c}: {e}")).collect();
                bail!(
                    "{} of {} cells failed (see {}):\n{}",
                    summary.failures.len(),
                    summary.cells.len(),
                    out.join(run::FAILURES_FILE).display(),
                    list.join("\n")
                );
            }
            Ok(())
        }
        Command::Report { input, out } => {
            report::write_report(&input, &out)?;
            Ok(())
        }
        Command::Analyze(a) => analyze_cmd(a),
    }
}

fn analyze_cmd(a: Analysis) -> Result<()> {
    match a {
        Analysis::Cka {
            a,
            b,
            data,
            probe,
            probe_size,
            out,
        } => {
            let (ca, cb) = load_pair(&a, &b)?;
            let bench = data.load()?;
            let Some(ds) = bench.domain(&probe) else {
                bail!("unknown probe domain {probe:?}");
            };
            parent_dir(&out)?;
            analyze::cka(&ca, &cb, &ds.head(probe_size), &out)?;
        }
        Analysis::Barrier { a, b, data, grid, out } => {
            let (ca, cb) = load_pair(&a, &b)?;
            let bench = data.load()?;
            parent_dir(&out)?;
            analyze::barrier(&ca, &cb, grid, &bench.all(), &out)?;
        }
        Analysis::Distance {
            data,
            domain,
            magnitudes,
            reg,
            size,
            seed,
            out,
        } => {
            let mags = magnitudes
                .split(',')
                .map(|m| m.trim().parse::<f64>().with_context(|| format!("magnitude {m:?}")))
                .collect::<Result<Vec<_>>>()?;
            let bench = data.load()?;
            let Some(ds) = bench.domain(&domain) else {
                bail!("unknown domain {domain:?}");
            };
            parent_dir(&out)?;
            analyze::distance(&ds.head(size), &mags, reg, seed, &out)?;
        }
        Analysis::Fluctuation { metrics, out } => {
            parent_dir(&out)?;
            analyze::fluctuation(&metrics, &out)?;
        }
    }
    Ok(())
}
