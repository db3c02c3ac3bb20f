//! The default five-domain glyph benchmark.

use std::path::Path;

use anyhow::{Context, Result};
use peer_core::synthdata::{default_roster, generate_domain, GlyphDataset};

use crate::config::DataConfig;
use crate::tables;

#[derive(Debug, Clone)]
pub struct Benchmark {
    /// Source first, then the targets in roster order.
    pub domains: Vec<GlyphDataset>,
}

impl Benchmark {
    pub fn generate(cfg: &DataConfig) -> Result<Self> {
        let domains = default_roster()
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let n = if i == 0 { cfg.source_size } else { cfg.target_size };
                generate_domain(spec, n, cfg.seed).with_context(|| format!("generating {}", spec.name))
            })
            .collect::<Result<_>>()?;
        Ok(Self { domains })
    }

    /// Reads `<name>.csv` for every roster domain from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let domains = default_roster()
            .into_iter()
            .map(|spec| {
                let path = dir.join(format!("{}.csv", spec.name));
                tables::read_dataset(&path, spec)
            })
            .collect::<Result<_>>()?;
        Ok(Self { domains })
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<String>> {
        let mut files = Vec::new();
        for ds in &self.domains {
            let name = format!("{}.csv", ds.name());
            tables::write_dataset(&dir.join(&name), ds)?;
            files.push(name);
        }
        Ok(files)
    }

    pub fn source(&self) -> &GlyphDataset {
        &self.domains[0]
    }

    pub fn targets(&self) -> &[GlyphDataset] {
        &self.domains[1..]
    }

    pub fn domain(&self, name: &str) -> Option<&GlyphDataset> {
        self.domains.iter().find(|d| d.name() == name)
    }

    pub fn all(&self) -> Vec<&GlyphDataset> {
        self.domains.iter().collect()
    }
}
