//! Binary checkpoint files.
//!
//! ```text
//! PEERCKPT1
//! 64 | 128 64 | 64 | 8 | 32 32
//! <epoch> <method_tag> <seed>
//! <little-endian f64 values in layout order>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use peer_core::nets::ParameterVector;
use peer_core::{Checkpoint, MlpSpec};
use thiserror::Error;

pub const MAGIC: &str = "PEERCKPT1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {MAGIC:?}, found {found:?}")]
    BadMagic { found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated checkpoint: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("value count mismatch: layout needs {expected} values, file holds {found} bytes past the header")]
    ValueCount { expected: usize, found: usize },
    #[error("invalid layout: {0}")]
    Layout(String),
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn spec_line(spec: &MlpSpec) -> String {
    format!(
        "{} | {} | {} | {} | {}",
        spec.input_dim,
        join(&spec.encoder_dims),
        spec.feature_dim,
        spec.num_classes,
        join(&spec.proj_dims)
    )
}

pub fn parse_spec_line(line: &str) -> Result<MlpSpec, CheckpointError> {
    let sections: Vec<&str> = line.split('|').map(str::trim).collect();
    if sections.len() != 5 {
        return Err(CheckpointError::Header(format!(
            "spec line needs 5 '|'-separated sections, got {}",
            sections.len()
        )));
    }
    let nums = |s: &str| -> Result<Vec<usize>, CheckpointError> {
        s.split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| CheckpointError::Header(format!("not an integer: {t:?}")))
            })
            .collect()
    };
    let one = |s: &str| -> Result<usize, CheckpointError> {
        match nums(s)?.as_slice() {
            [v] => Ok(*v),
            other => Err(CheckpointError::Header(format!("expected one integer, got {other:?}"))),
        }
    };
    let spec = MlpSpec {
        input_dim: one(sections[0])?,
        encoder_dims: nums(sections[1])?,
        feature_dim: one(sections[2])?,
        num_classes: one(sections[3])?,
        proj_dims: nums(sections[4])?,
    };
    spec.validate().map_err(|e| CheckpointError::Layout(e.to_string()))?;
    Ok(spec)
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>, CheckpointError> {
    if ckpt.method_tag.is_empty() || ckpt.method_tag.chars().any(char::is_whitespace) {
        return Err(CheckpointError::Header(format!(
            "method tag must be a non-empty token, got {:?}",
            ckpt.method_tag
        )));
    }
    let expected: usize = ckpt.spec.layout().iter().map(|s| s.len()).sum();
    if ckpt.params.layout() != ckpt.spec.layout().as_slice() {
        return Err(CheckpointError::Layout(format!(
            "parameters ({} values) do not match the architecture layout ({expected} values)",
            ckpt.params.len()
        )));
    }
    let mut out = Vec::with_capacity(64 + 8 * expected);
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "{}", spec_line(&ckpt.spec)).unwrap();
    writeln!(out, "{} {} {}", ckpt.epoch, ckpt.method_tag, ckpt.seed).unwrap();
    for v in ckpt.params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn next_line<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str, CheckpointError> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::Header(format!("missing {what} line")))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| CheckpointError::Header(format!("{what} line is not UTF-8")))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let head = &bytes[..bytes.len().min(MAGIC.len() + 1)];
    if head != format!("{MAGIC}\n").as_bytes() {
        return Err(CheckpointError::BadMagic {
            found: String::from_utf8_lossy(head).trim_end().to_string(),
        });
    }
    let mut pos = MAGIC.len() + 1;
    let spec = parse_spec_line(next_line(bytes, &mut pos, "spec")?)?;
    let meta = next_line(bytes, &mut pos, "metadata")?;
    let fields: Vec<&str> = meta.split_whitespace().collect();
    let [epoch, tag, seed] = fields.as_slice() else {
        return Err(CheckpointError::Header(format!(
            "metadata line needs `epoch method_tag seed`, got {meta:?}"
        )));
    };
    let epoch = epoch
        .parse()
        .map_err(|_| CheckpointError::Header(format!("bad epoch {epoch:?}")))?;
    let seed = seed
        .parse()
        .map_err(|_| CheckpointError::Header(format!("bad seed {seed:?}")))?;

    let layout = spec.layout();
    let expected: usize = layout.iter().map(|s| s.len()).sum();
    let body = &bytes[pos..];
    if body.len() < 8 * expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: body.len() / 8,
        });
    }
    if body.len() != 8 * expected {
        return Err(CheckpointError::ValueCount {
            expected,
            found: body.len(),
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ParameterVector::new(layout, values).map_err(|e| CheckpointError::Layout(e.to_string()))?;
    Ok(Checkpoint {
        spec,
        params,
        epoch,
        method_tag: tag.to_string(),
        seed,
    })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let bytes = encode(ckpt)?;
    fs::write(path, bytes).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
