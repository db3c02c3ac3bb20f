//! Line-based `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; an empty
//! file yields the defaults. Command-line flags are applied after the file
//! and win over it.

use std::collections::BTreeMap;
use std::fmt::Write;

use peer_core::losses::Objective;
use peer_core::trainer::{Method, TrainConfig};
use peer_core::MlpSpec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    /// Where the offending value came from, e.g. `run.cfg line 3` or
    /// `flag --k`.
    pub origin: String,
    pub message: String,
}

/// Benchmark generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub seed: u64,
    pub source_size: usize,
    pub target_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            source_size: 2048,
            target_size: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataConfig,
    origins: BTreeMap<&'static str, String>,
}

/// All accepted keys, in echo order.
pub const KEYS: [&str; 15] = [
    "method",
    "epochs",
    "k",
    "w",
    "lambda",
    "tau",
    "objective",
    "lr",
    "batch_size",
    "seed",
    "pretrain_epochs",
    "eval_every",
    "data_seed",
    "source_size",
    "target_size",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse {v:?} as a value for {key}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = parse_num(key, v)?;
    if !x.is_finite() {
        return Err(format!("{key} must be finite, got {v}"));
    }
    Ok(x)
}

impl RunConfig {
    /// Assigns one key. `origin` is recorded for later error messages.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            origin: origin.to_string(),
            message,
        };
        let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
            return Err(err(format!("unknown key {key:?}")));
        };
        self.assign(canonical, value.trim()).map_err(err)?;
        self.origins.insert(canonical, origin.to_string());
        Ok(())
    }

    fn assign(&mut self, key: &'static str, v: &str) -> Result<(), String> {
        let t = &mut self.train;
        match key {
            "method" => t.method = Method::parse(v).map_err(|e| e.to_string())?,
            "epochs" => {
                t.epochs = parse_num(key, v)?;
                if t.epochs < 1 {
                    return Err("epochs ≥ 1 required, got 0".into());
                }
            }
            "k" => {
                t.k = parse_num(key, v)?;
                if t.k < 1 {
                    return Err(format!("k ≥ 1 required, got {}", t.k));
                }
            }
            "w" => {
                t.w = parse_f64(key, v)?;
                if t.w < 0.0 {
                    return Err(format!("w ≥ 0 required, got {v}"));
                }
            }
            "lambda" => {
                // `1/r` selects the reciprocal projection dimension.
                t.lambda = if v.replace(' ', "") == "1/r" {
                    1.0 / MlpSpec::default().proj_dim() as f64
                } else {
                    parse_f64(key, v)?
                };
                if t.lambda < 0.0 {
                    return Err(format!("lambda ≥ 0 required, got {v}"));
                }
            }
            "tau" => {
                t.tau = parse_f64(key, v)?;
                if t.tau <= 0.0 {
                    return Err(format!("tau > 0 required, got {v}"));
                }
            }
            "objective" => t.objective = Objective::parse(v).map_err(|e| e.to_string())?,
            "lr" => {
                t.lr = parse_f64(key, v)?;
                if t.lr <= 0.0 {
                    return Err(format!("lr > 0 required, got {v}"));
                }
            }
            "batch_size" => {
                t.batch_size = parse_num(key, v)?;
                if t.batch_size < 2 {
                    return Err(format!("batch_size ≥ 2 required, got {v}"));
                }
            }
            "seed" => t.seed = parse_num(key, v)?,
            "pretrain_epochs" => t.pretrain_epochs = parse_num(key, v)?,
            "eval_every" => {
                let e: usize = parse_num(key, v)?;
                if e < 1 {
                    return Err("eval_every ≥ 1 required, got 0".into());
                }
                t.eval_every = Some(e);
            }
            "data_seed" => self.data.seed = parse_num(key, v)?,
            "source_size" | "target_size" => {
                let n: usize = parse_num(key, v)?;
                if n < 8 {
                    return Err(format!("{key} ≥ 8 required, got {n}"));
                }
                if key == "source_size" {
                    self.data.source_size = n;
                } else {
                    self.data.target_size = n;
                }
            }
            _ => unreachable!("key list and match arms disagree"),
        }
        Ok(())
    }

    /// Cross-field checks, reported against the lines that set the fields.
    pub fn finish(self) -> Result<Self, ConfigError> {
        if let Err(e) = self.train.validate() {
            let origin = ["epochs", "k"]
                .iter()
                .filter_map(|k| self.origins.get(k).cloned())
                .collect::<Vec<_>>()
                .join(", ");
            return Err(ConfigError {
                origin: if origin.is_empty() { "defaults".into() } else { origin },
                message: e.to_string(),
            });
        }
        Ok(self)
    }

    pub fn value_of(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "method" => t.method.name().to_string(),
            "epochs" => t.epochs.to_string(),
            "k" => t.k.to_string(),
            "w" => t.w.to_string(),
            "lambda" => t.lambda.to_string(),
            "tau" => t.tau.to_string(),
            "objective" => t.objective.name().to_string(),
            "lr" => t.lr.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "seed" => t.seed.to_string(),
            "pretrain_epochs" => t.pretrain_epochs.to_string(),
            "eval_every" => t.eval_period().to_string(),
            "data_seed" => self.data.seed.to_string(),
            "source_size" => self.data.source_size.to_string(),
            "target_size" => self.data.target_size.to_string(),
            _ => return None,
        })
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            writeln!(out, "{k} = {}", self.value_of(k).unwrap()).unwrap();
        }
        out
    }
}

/// Splits a config line into `(key, value)`, or `None` for blank and
/// comment lines.
pub fn split_line(line: &str) -> Result<Option<(&str, &str)>, String> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got {line:?}"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(format!("expected `key = value`, got {line:?}"));
    }
    Ok(Some((k, v)))
}

/// Parses config text; `name` labels the source in error messages.
/// Cross-field checks are left to [`RunConfig::finish`] so flags can still
/// be applied.
pub fn parse_config(text: &str, name: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, line) in text.lines().enumerate() {
        let origin = format!("{name} line {}", i + 1);
        match split_line(line) {
            Ok(None) => {}
            Ok(Some((k, v))) => cfg.set(k, v, &origin)?,
            Err(message) => return Err(ConfigError { origin, message }),
        }
    }
    Ok(cfg)
}
