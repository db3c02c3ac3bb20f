//! Run manifests: a `key = value` text file written before any result and
//! rewritten once the run has finished.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};

use crate::config::{split_line, RunConfig};

pub const FILE_NAME: &str = "manifest.txt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Manifest {
    pub label: String,
    pub status: String,
    pub config: String,
    pub duration: Option<Duration>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn running(label: &str, cfg: &RunConfig) -> Self {
        Self {
            label: label.to_string(),
            status: "running".into(),
            config: cfg.echo(),
            duration: None,
            files: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "# peerlab run manifest\nversion = {VERSION}\nstatus = {}\nlabel = {}\n",
            self.status, self.label
        );
        s.push_str(&self.config);
        if let Some(d) = self.duration {
            s.push_str(&format!("duration_secs = {:.3}\n", d.as_secs_f64()));
        }
        for f in &self.files {
            s.push_str(&format!("file = {f}\n"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE_NAME);
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

/// Reads a manifest into key → values (keys such as `file` repeat).
pub fn read(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some((k, v)) = split_line(line).map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), i + 1))? {
            out.entry(k.to_string()).or_default().push(v.to_string());
        }
    }
    Ok(out)
}

pub fn first<'a>(m: &'a BTreeMap<String, Vec<String>>, key: &str) -> Option<&'a str> {
    m.get(key).and_then(|v| v.first()).map(String::as_str)
}
