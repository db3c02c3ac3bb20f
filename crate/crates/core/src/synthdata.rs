//! Procedural 8×8 glyph benchmark with one clean source domain and shifted
//! target domains, plus RandAugment-style augmentation policies that can be
//! resampled during training.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;

pub const SIDE: usize = 8;
pub const PIXELS: usize = SIDE * SIDE;
pub const NUM_CLASSES: usize = 8;

const TEMPLATES: [[&str; SIDE]; NUM_CLASSES] = [
    [
        "........", ".##.....", ".##.....", ".##.....", ".##.....", ".######.", ".######.", "........",
    ],
    [
        "........", ".######.", ".######.", "...##...", "...##...", "...##...", "...##...", "........",
    ],
    [
        "........", ".#####..", ".##.....", ".####...", ".##.....", ".##.....", ".##.....", "........",
    ],
    [
        "........", ".######.", ".....##.", "....##..", "...##...", "..##....", ".######.", "........",
    ],
    [
        "........", ".##..##.", ".##..##.", ".######.", ".....##.", ".....##.", ".....##.", "........",
    ],
    [
        "........", ".#####..", ".##..#..", ".#####..", ".##.....", ".##.....", ".##.....", "........",
    ],
    [
        "........", "..#.....", "..##....", "..###...", "..####..", "..#####.", "..######", "........",
    ],
    [
        "........", ".##..##.", ".##..##.", "..####..", "...##...", "...##...", "...##...", "........",
    ],
];

/// The binary stencil for class `label`, row-major.
pub fn template(label: usize) -> [f64; PIXELS] {
    let mut out = [0.0; PIXELS];
    for (r, line) in TEMPLATES[label].iter().enumerate() {
        for (c, ch) in line.bytes().enumerate() {
            if ch == b'#' {
                out[r * SIDE + c] = 1.0;
            }
        }
    }
    out
}

/// Shifts an image by (`dx` columns, `dy` rows), filling with zeros.
pub fn translate(img: &[f64], dx: i32, dy: i32) -> [f64; PIXELS] {
    let mut out = [0.0; PIXELS];
    for r in 0..SIDE as i32 {
        for c in 0..SIDE as i32 {
            let (sr, sc) = (r - dy, c - dx);
            if (0..SIDE as i32).contains(&sr) && (0..SIDE as i32).contains(&sc) {
                out[(r * SIDE as i32 + c) as usize] = img[(sr * SIDE as i32 + sc) as usize];
            }
        }
    }
    out
}

/// Counter-clockwise rotation about the image centre, nearest-neighbour
/// resampling, zero fill outside the grid.
pub fn rotate(img: &[f64], degrees: f64) -> [f64; PIXELS] {
    let theta = degrees.to_radians();
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let half = (SIDE as f64 - 1.0) / 2.0;
    let mut out = [0.0; PIXELS];
    for r in 0..SIDE {
        for col in 0..SIDE {
            let x = col as f64 - half;
            let y = half - r as f64;
            let xs = x * c + y * s;
            let ys = -x * s + y * c;
            let sc = libm::round(xs + half);
            let sr = libm::round(half - ys);
            if (0.0..SIDE as f64).contains(&sc) && (0.0..SIDE as f64).contains(&sr) {
                out[r * SIDE + col] = img[sr as usize * SIDE + sc as usize];
            }
        }
    }
    out
}

fn occlude(img: &mut [f64], side: usize, top: usize, left: usize) {
    for r in top..(top + side).min(SIDE) {
        for c in left..(left + side).min(SIDE) {
            img[r * SIDE + c] = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub rotation_deg: f64,
    pub intensity_scale: f64,
    pub intensity_offset: f64,
    pub noise_std: f64,
    pub occlusion_frac: f64,
    pub seed_offset: u64,
}

impl DomainSpec {
    pub fn identity(name: &str) -> Self {
        Self {
            name: name.into(),
            rotation_deg: 0.0,
            intensity_scale: 1.0,
            intensity_offset: 0.0,
            noise_std: 0.0,
            occlusion_frac: 0.0,
            seed_offset: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.occlusion_frac) {
            return Err(Error::Range {
                name: "occlusion_frac",
                value: self.occlusion_frac,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Range {
                name: "noise_std",
                value: self.noise_std,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(())
    }

    /// Side of the square occlusion block covering `occlusion_frac` of the
    /// image.
    pub fn occlusion_side(&self) -> usize {
        let side = libm::round(libm::sqrt(self.occlusion_frac * PIXELS as f64)) as usize;
        side.min(SIDE)
    }
}

/// Source plus four targets of increasing shift: rotation, contrast,
/// pixel noise, and rotation with occlusion.
pub fn default_roster() -> Vec<DomainSpec> {
    let mut source = DomainSpec::identity("source");
    source.seed_offset = 0;
    let mut a = DomainSpec::identity("target_a");
    a.rotation_deg = 30.0;
    a.seed_offset = 1;
    let mut b = DomainSpec::identity("target_b");
    b.intensity_scale = 0.6;
    b.intensity_offset = 0.2;
    b.seed_offset = 2;
    let mut c = DomainSpec::identity("target_c");
    c.noise_std = 0.25;
    c.seed_offset = 3;
    let mut d = DomainSpec::identity("target_d");
    d.rotation_deg = 45.0;
    d.occlusion_frac = 0.25;
    d.seed_offset = 4;
    vec![source, a, b, c, d]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphDataset {
    pub x: Tensor,
    pub y: Vec<usize>,
    pub domain: DomainSpec,
}

impl GlyphDataset {
    pub fn new(x: Tensor, y: Vec<usize>, domain: DomainSpec) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape {
                op: "dataset",
                left_rows: x.rows(),
                left_cols: x.cols(),
                right_rows: y.len(),
                right_cols: 1,
            });
        }
        Ok(Self { x, y, domain })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.domain.name
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        Self {
            x: self.x.select_rows(&idx),
            y: self.y[..idx.len()].to_vec(),
            domain: self.domain.clone(),
        }
    }
}

/// Draws `n` jittered glyphs (labels cycle through the classes) and applies
/// the domain shift: rotate, scale/offset intensity, clamp to [0, 1], add
/// Gaussian noise, zero the occlusion block.
pub fn generate_domain(spec: &DomainSpec, n: usize, seed: u64) -> Result<GlyphDataset> {
    if n < NUM_CLASSES {
        return Err(Error::TooSmall {
            min: NUM_CLASSES,
            got: n,
        });
    }
    spec.validate()?;
    let mut rng = seed::rng(&[seed, spec.seed_offset, 0xD0]);
    let block = spec.occlusion_side();
    let mut data = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % NUM_CLASSES;
        let dx = rng.random_range(-1..=1);
        let dy = rng.random_range(-1..=1);
        let mut img = translate(&template(label), dx, dy);
        if spec.rotation_deg != 0.0 {
            img = rotate(&img, spec.rotation_deg);
        }
        for v in &mut img {
            *v = (*v * spec.intensity_scale + spec.intensity_offset).clamp(0.0, 1.0);
        }
        if spec.noise_std > 0.0 {
            for v in &mut img {
                let z: f64 = rng.sample(StandardNormal);
                *v += spec.noise_std * z;
            }
        }
        if block > 0 {
            let top = rng.random_range(0..=SIDE - block);
            let left = rng.random_range(0..=SIDE - block);
            occlude(&mut img, block, top, left);
        }
        data.extend_from_slice(&img);
        labels.push(label);
    }
    GlyphDataset::new(Tensor::from_vec(n, PIXELS, data)?, labels, spec.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AugOp {
    Rotate,
    Intensity,
    Noise,
    Occlude,
    Translate,
}

impl AugOp {
    pub const ALL: [AugOp; 5] = [
        AugOp::Rotate,
        AugOp::Intensity,
        AugOp::Noise,
        AugOp::Occlude,
        AugOp::Translate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugOp::Rotate => "rotate",
            AugOp::Intensity => "intensity",
            AugOp::Noise => "noise",
            AugOp::Occlude => "occlude",
            AugOp::Translate => "translate",
        }
    }
}

/// A sampled augmentation configuration standing in for `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPolicy {
    /// Distinct ops in canonical order; `ops.len()` is the op count.
    pub ops: Vec<AugOp>,
    pub magnitude: f64,
    pub policy_seed: u64,
}

impl AugPolicy {
    pub fn new(mut ops: Vec<AugOp>, magnitude: f64, policy_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::Range {
                name: "magnitude",
                value: magnitude,
                lo: 0.0,
                hi: 1.0,
            });
        }
        ops.sort();
        ops.dedup();
        Ok(Self {
            ops,
            magnitude,
            policy_seed,
        })
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }
}

/// Samples a fresh policy: 1 to 3 ops without replacement and a magnitude
/// from the grid {0.1, ..., 1.0}.
pub fn reinit_policy(rng_seed: u64) -> AugPolicy {
    let mut rng = seed::rng(&[rng_seed, 0xA6]);
    let num_ops = rng.random_range(1..=3usize);
    let magnitude = rng.random_range(1..=10u32) as f64 / 10.0;
    let mut ops: Vec<AugOp> = rand::seq::index::sample(&mut rng, AugOp::ALL.len(), num_ops)
        .into_iter()
        .map(|i| AugOp::ALL[i])
        .collect();
    ops.sort();
    AugPolicy {
        ops,
        magnitude,
        policy_seed: rng.random(),
    }
}

/// Applies the policy to every row of `batch`. Per-sample randomness is keyed
/// by (policy seed, call seed, row index).
pub fn apply_policy(policy: &AugPolicy, batch: &Tensor, call_seed: u64) -> Result<Tensor> {
    if batch.cols() != PIXELS {
        return Err(Error::Shape {
            op: "apply_policy",
            left_rows: batch.rows(),
            left_cols: batch.cols(),
            right_rows: batch.rows(),
            right_cols: PIXELS,
        });
    }
    let m = policy.magnitude;
    if m == 0.0 || policy.ops.is_empty() {
        return Ok(batch.clone());
    }
    let mut out = batch.clone();
    for i in 0..batch.rows() {
        let mut rng = seed::rng(&[policy.policy_seed, call_seed, i as u64]);
        let row = out.row_mut(i);
        for &op in &policy.ops {
            match op {
                AugOp::Rotate => {
                    let max = 45.0 * m;
                    let angle = rng.random_range(-max..=max);
                    let img = rotate(row, angle);
                    row.copy_from_slice(&img);
                }
                AugOp::Intensity => {
                    let s = rng.random_range((1.0 - 0.5 * m)..=(1.0 + 0.5 * m));
                    for v in row.iter_mut() {
                        *v *= s;
                    }
                }
                AugOp::Noise => {
                    let std = 0.3 * m;
                    for v in row.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v += std * z;
                    }
                }
                AugOp::Occlude => {
                    let side = (libm::ceil(8.0 * m) as usize).min(4);
                    let top = rng.random_range(0..=SIDE - side);
                    let left = rng.random_range(0..=SIDE - side);
                    occlude(row, side, top, left);
                }
                AugOp::Translate => {
                    let max = libm::ceil(2.0 * m) as i32;
                    let dx = rng.random_range(-max..=max);
                    let dy = rng.random_range(-max..=max);
                    let img = translate(row, dx, dy);
                    row.copy_from_slice(&img);
                }
            }
        }
    }
    Ok(out)
}
