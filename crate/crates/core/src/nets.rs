//! Encoder `H`, classifier `C` and projection head `R` as plain MLPs with
//! hand-written backward passes, plus the flat parameter store and the
//! parameter-space arithmetic (averaging, running means, interpolation)
//! the training loop and the diagnostics are built on.
//!
//! Parameter layout, in order: encoder layers (hidden layers with ReLU, then
//! a linear layer to the feature width), the single classifier layer, then
//! the projection-head layers (ReLU between, last one linear). Each layer is
//! stored as its `fan_in × fan_out` weight matrix (row-major) followed by its
//! bias.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// Hidden widths of the encoder; a final linear layer maps the last one
    /// to `feature_dim`.
    pub encoder_dims: Vec<usize>,
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Projection-head widths; the last entry is the projection dimension.
    pub proj_dims: Vec<usize>,
}

impl Default for MlpSpec {
    /// 8×8 glyph inputs, encoder 64→128→64→64, 8 classes, head 64→32→32.
    fn default() -> Self {
        Self {
            input_dim: 64,
            encoder_dims: vec![128, 64],
            feature_dim: 64,
            num_classes: 8,
            proj_dims: vec![32, 32],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_dims.is_empty() {
            return Err(Error::Spec("encoder_dims must be non-empty".into()));
        }
        if self.proj_dims.is_empty() {
            return Err(Error::Spec("proj_dims must be non-empty".into()));
        }
        let widths = [self.input_dim, self.feature_dim, self.num_classes];
        if widths
            .iter()
            .chain(&self.encoder_dims)
            .chain(&self.proj_dims)
            .any(|&w| w == 0)
        {
            return Err(Error::Spec("all widths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn proj_dim(&self) -> usize {
        *self.proj_dims.last().unwrap_or(&0)
    }

    pub fn encoder_layer_count(&self) -> usize {
        self.encoder_dims.len() + 1
    }

    pub fn layout(&self) -> Vec<LayerShape> {
        let mut out = Vec::new();
        let mut prev = self.input_dim;
        for &w in self.encoder_dims.iter().chain(core::iter::once(&self.feature_dim)) {
            out.push(LayerShape {
                fan_in: prev,
                fan_out: w,
            });
            prev = w;
        }
        out.push(LayerShape {
            fan_in: self.feature_dim,
            fan_out: self.num_classes,
        });
        prev = self.feature_dim;
        for &w in &self.proj_dims {
            out.push(LayerShape {
                fan_in: prev,
                fan_out: w,
            });
            prev = w;
        }
        out
    }

    fn encoder_layers(&self) -> Range<usize> {
        0..self.encoder_layer_count()
    }

    fn classifier_layer(&self) -> usize {
        self.encoder_layer_count()
    }

    fn head_layers(&self) -> Range<usize> {
        let start = self.encoder_layer_count() + 1;
        start..start + self.proj_dims.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: Vec<LayerShape>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(layout: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let want: usize = layout.iter().map(LayerShape::len).sum();
        if values.len() != want {
            return Err(Error::Layout(format!(
                "layout needs {want} values, got {}",
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Vec<LayerShape>) -> Self {
        let n = layout.iter().map(LayerShape::len).sum();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Offset of layer `i`'s weight block.
    pub fn layer_offset(&self, i: usize) -> usize {
        self.layout[..i].iter().map(LayerShape::len).sum()
    }

    /// Value range covered by layers `layers`.
    pub fn layer_range(&self, layers: Range<usize>) -> Range<usize> {
        let start = self.layer_offset(layers.start);
        let len: usize = self.layout[layers].iter().map(LayerShape::len).sum();
        start..start + len
    }

    pub fn check_layout(&self, other: &ParameterVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout(format!(
                "{} layers / {} values vs {} layers / {} values",
                self.layout.len(),
                self.values.len(),
                other.layout.len(),
                other.values.len()
            )));
        }
        Ok(())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &ParameterVector, s: f64) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    fn layer(&self, i: usize) -> (LayerShape, &[f64], &[f64]) {
        let shape = self.layout[i];
        let off = self.layer_offset(i);
        let nw = shape.fan_in * shape.fan_out;
        (
            shape,
            &self.values[off..off + nw],
            &self.values[off + nw..off + nw + shape.fan_out],
        )
    }

    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^ self.values.len() as u64
    }
}

/// Model snapshot with enough metadata to be reloaded and re-evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: MlpSpec,
    pub params: ParameterVector,
    pub epoch: usize,
    pub method_tag: String,
    pub seed: u64,
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(spec: &MlpSpec, seed: u64) -> Result<ParameterVector> {
    spec.validate()?;
    let layout = spec.layout();
    let mut params = ParameterVector::zeros(layout.clone());
    let mut rng = seed::rng(&[seed, 0x1417]);
    let mut off = 0;
    for shape in &layout {
        let bound = libm::sqrt(6.0 / (shape.fan_in + shape.fan_out) as f64);
        let nw = shape.fan_in * shape.fan_out;
        for v in &mut params.values[off..off + nw] {
            *v = rng.random_range(-bound..=bound);
        }
        off += shape.len();
    }
    Ok(params)
}

/// Activations of one layer stack: `acts[0]` is the stack input, `acts[i]`
/// the output of layer `i - 1`.
#[derive(Debug, Clone)]
struct StackCache {
    acts: Vec<Tensor>,
}

fn affine(x: &Tensor, shape: LayerShape, w: &[f64], b: &[f64]) -> Result<Tensor> {
    let wt = Tensor::from_vec(shape.fan_in, shape.fan_out, w.to_vec())?;
    let mut out = matmul(x, &wt)?;
    for r in 0..out.rows() {
        for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    Ok(out)
}

fn relu_inplace(t: &mut Tensor) {
    for v in t.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn stack_forward(params: &ParameterVector, layers: Range<usize>, x: &Tensor) -> Result<StackCache> {
    let last = layers.end - 1;
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.clone());
    for i in layers {
        let (shape, w, b) = params.layer(i);
        let mut out = affine(acts.last().unwrap(), shape, w, b)?;
        if i != last {
            relu_inplace(&mut out);
        }
        acts.push(out);
    }
    Ok(StackCache { acts })
}

/// Backpropagates `grad_out` (w.r.t. the stack output) through the stack,
/// accumulating parameter gradients into `grads`. Returns the gradient
/// w.r.t. the stack input.
fn stack_backward(
    params: &ParameterVector,
    layers: Range<usize>,
    cache: &StackCache,
    grad_out: Tensor,
    grads: &mut ParameterVector,
) -> Result<Tensor> {
    let first = layers.start;
    let last = layers.end - 1;
    let mut g = grad_out;
    for i in layers.rev() {
        let local = i - first;
        if i != last {
            // ReLU: output > 0 exactly where pre-activation > 0.
            let out = &cache.acts[local + 1];
            for (gv, ov) in g.data_mut().iter_mut().zip(out.data()) {
                if *ov <= 0.0 {
                    *gv = 0.0;
                }
            }
        }
        let input = &cache.acts[local];
        let (shape, w, _) = params.layer(i);
        let dw = matmul_tn(input, &g)?;
        let off = params.layer_offset(i);
        let nw = shape.fan_in * shape.fan_out;
        for (acc, v) in grads.values[off..off + nw].iter_mut().zip(dw.data()) {
            *acc += v;
        }
        let db = &mut grads.values[off + nw..off + nw + shape.fan_out];
        for r in 0..g.rows() {
            for (acc, v) in db.iter_mut().zip(g.row(r)) {
                *acc += v;
            }
        }
        let wt = Tensor::from_vec(shape.fan_in, shape.fan_out, w.to_vec())?;
        g = matmul_nt(&g, &wt)?;
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    encoder: StackCache,
    head: StackCache,
}

impl ForwardCache {
    /// Encoder hidden outputs followed by the feature output.
    pub fn layer_activations(&self) -> &[Tensor] {
        &self.encoder.acts[1..]
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub features: Tensor,
    pub logits: Tensor,
    pub projections: Tensor,
    pub cache: ForwardCache,
}

fn check_params(spec: &MlpSpec, params: &ParameterVector) -> Result<()> {
    if params.layout != spec.layout() {
        return Err(Error::Layout("parameters do not match the architecture".into()));
    }
    Ok(())
}

fn check_input(x: &Tensor, width: usize) -> Result<()> {
    if x.cols() != width {
        return Err(Error::Shape {
            op: "forward",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: x.rows(),
            right_cols: width,
        });
    }
    Ok(())
}

pub fn forward(spec: &MlpSpec, params: &ParameterVector, x: &Tensor) -> Result<ForwardPass> {
    check_params(spec, params)?;
    check_input(x, spec.input_dim)?;
    let encoder = stack_forward(params, spec.encoder_layers(), x)?;
    let features = encoder.acts.last().unwrap().clone();
    let (shape, w, b) = params.layer(spec.classifier_layer());
    let logits = affine(&features, shape, w, b)?;
    let head = stack_forward(params, spec.head_layers(), &features)?;
    let projections = head.acts.last().unwrap().clone();
    Ok(ForwardPass {
        features,
        logits,
        projections,
        cache: ForwardCache {
            fingerprint: params.fingerprint(),
            encoder,
            head,
        },
    })
}

/// Encoder-only forward pass (features of `H`).
pub fn encode(spec: &MlpSpec, params: &ParameterVector, x: &Tensor) -> Result<Tensor> {
    check_params(spec, params)?;
    check_input(x, spec.input_dim)?;
    let mut cache = stack_forward(params, spec.encoder_layers(), x)?;
    Ok(cache.acts.pop().unwrap())
}

/// Classifier logits only.
pub fn predict(spec: &MlpSpec, params: &ParameterVector, x: &Tensor) -> Result<Tensor> {
    let features = encode(spec, params, x)?;
    let (shape, w, b) = params.layer(spec.classifier_layer());
    affine(&features, shape, w, b)
}

/// Reverse-mode gradient of a scalar whose sensitivities w.r.t. logits,
/// projections and features are given. Any of the three may be all-zero.
pub fn backward(
    spec: &MlpSpec,
    params: &ParameterVector,
    cache: &ForwardCache,
    grad_logits: &Tensor,
    grad_projections: &Tensor,
    grad_features: &Tensor,
) -> Result<ParameterVector> {
    check_params(spec, params)?;
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::StaleCache);
    }
    let features = cache.encoder.acts.last().unwrap();
    let n = features.rows();
    for (g, width) in [
        (grad_logits, spec.num_classes),
        (grad_projections, spec.proj_dim()),
        (grad_features, spec.feature_dim),
    ] {
        if g.shape() != (n, width) {
            return Err(Error::Shape {
                op: "backward",
                left_rows: g.rows(),
                left_cols: g.cols(),
                right_rows: n,
                right_cols: width,
            });
        }
    }
    let mut grads = params.zeros_like();
    let mut g_feat = stack_backward(
        params,
        spec.head_layers(),
        &cache.head,
        grad_projections.clone(),
        &mut grads,
    )?;
    let cls = StackCache {
        acts: vec![features.clone()],
    };
    let c = spec.classifier_layer();
    let g_cls = stack_backward(params, c..c + 1, &cls, grad_logits.clone(), &mut grads)?;
    g_feat.add_scaled(&g_cls, 1.0)?;
    g_feat.add_scaled(grad_features, 1.0)?;
    stack_backward(params, spec.encoder_layers(), &cache.encoder, g_feat, &mut grads)?;
    Ok(grads)
}

/// The projection head `R` of one parameter store, usable on features that
/// came from any encoder.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionHead<'a> {
    spec: &'a MlpSpec,
    params: &'a ParameterVector,
}

#[derive(Debug, Clone)]
pub struct HeadPass {
    pub projections: Tensor,
    cache: StackCache,
}

impl<'a> ProjectionHead<'a> {
    pub fn new(spec: &'a MlpSpec, params: &'a ParameterVector) -> Result<Self> {
        check_params(spec, params)?;
        Ok(Self { spec, params })
    }

    /// Range of head parameters inside the full parameter vector.
    pub fn param_range(&self) -> Range<usize> {
        self.params.layer_range(self.spec.head_layers())
    }

    pub fn forward(&self, features: &Tensor) -> Result<HeadPass> {
        check_input(features, self.spec.feature_dim)?;
        let cache = stack_forward(self.params, self.spec.head_layers(), features)?;
        Ok(HeadPass {
            projections: cache.acts.last().unwrap().clone(),
            cache,
        })
    }

    /// Returns (gradient w.r.t. the input features, gradient w.r.t. the head
    /// parameters as a flat slice aligned with [`Self::param_range`]).
    pub fn backward(&self, pass: &HeadPass, grad_proj: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        if grad_proj.shape() != pass.projections.shape() {
            return Err(crate::tensor::shape_err("head_backward", grad_proj, &pass.projections));
        }
        let mut grads = self.params.zeros_like();
        let g = stack_backward(
            self.params,
            self.spec.head_layers(),
            &pass.cache,
            grad_proj.clone(),
            &mut grads,
        )?;
        Ok((g, grads.values[self.param_range()].to_vec()))
    }
}

/// Uniform mean of a trajectory of snapshots, summed in list order.
pub fn average_params(snapshots: &[ParameterVector]) -> Result<ParameterVector> {
    let first = snapshots.first().ok_or(Error::EmptyTrajectory)?;
    let mut acc = first.clone();
    for s in &snapshots[1..] {
        acc.add_scaled(s, 1.0)?;
    }
    let n = snapshots.len() as f64;
    for v in &mut acc.values {
        *v /= n;
    }
    Ok(acc)
}

/// Folds one more snapshot into a running mean over `count` snapshots.
pub fn running_mean_update(
    mean: &ParameterVector,
    count: usize,
    new: &ParameterVector,
) -> Result<(ParameterVector, usize)> {
    mean.check_layout(new)?;
    if count == 0 {
        return Err(Error::Range {
            name: "count",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let denom = (count + 1) as f64;
    let mut out = mean.clone();
    for (m, x) in out.values.iter_mut().zip(&new.values) {
        *m += (x - *m) / denom;
    }
    Ok((out, count + 1))
}

/// `alpha · a + (1 − alpha) · b`; the endpoints return copies.
pub fn interpolate_params(a: &ParameterVector, b: &ParameterVector, alpha: f64) -> Result<ParameterVector> {
    a.check_layout(b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Range {
            name: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if alpha == 1.0 {
        return Ok(a.clone());
    }
    if alpha == 0.0 {
        return Ok(b.clone());
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        // Shared coordinates stay bit-identical along the path.
        .map(|(&x, &y)| if x == y { x } else { alpha * x + (1.0 - alpha) * y })
        .collect();
    Ok(ParameterVector {
        layout: a.layout.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpSpec {
        MlpSpec {
            input_dim: 2,
            encoder_dims: vec![3],
            feature_dim: 2,
            num_classes: 2,
            proj_dims: vec![2],
        }
    }

    fn pv(vals: &[f64]) -> ParameterVector {
        ParameterVector::new(
            vec![LayerShape {
                fan_in: 0,
                fan_out: vals.len(),
            }],
            vals.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn default_spec_layout() {
        let spec = MlpSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.layout().len(), 6);
        assert_eq!(spec.proj_dim(), 32);
        let n: usize = spec.layout().iter().map(LayerShape::len).sum();
        assert_eq!(n, 24392);
    }

    #[test]
    fn spec_validation() {
        let mut s = tiny();
        s.encoder_dims.clear();
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.proj_dims = vec![0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = MlpSpec::default();
        let a = init_model(&spec, 9).unwrap();
        let b = init_model(&spec, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_model(&spec, 10).unwrap());
        for (i, shape) in spec.layout().iter().enumerate() {
            let (_, w, bias) = a.layer(i);
            assert!(bias.iter().all(|&v| v == 0.0));
            let bound = libm::sqrt(6.0 / (shape.fan_in + shape.fan_out) as f64);
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        // 64 -> 128 layer: sqrt(6/192)
        let (_, w, _) = a.layer(0);
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= 0.1768 + 1e-4 && max > 0.17);
    }

    #[test]
    fn zero_model_gives_zero_outputs() {
        let spec = tiny();
        let p = ParameterVector::zeros(spec.layout());
        let out = forward(&spec, &p, &Tensor::zeros(4, 2)).unwrap();
        assert!(out.features.data().iter().all(|&v| v == 0.0));
        assert!(out.logits.data().iter().all(|&v| v == 0.0));
        assert!(out.projections.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let spec = tiny();
        let p = init_model(&spec, 1).unwrap();
        assert!(matches!(
            forward(&spec, &p, &Tensor::zeros(3, 5)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn backward_zero_upstream_is_zero() {
        let spec = tiny();
        let p = init_model(&spec, 3).unwrap();
        let x = Tensor::from_rows(&[&[0.3, -0.2], &[1.0, 0.5]]);
        let f = forward(&spec, &p, &x).unwrap();
        let g = backward(
            &spec,
            &p,
            &f.cache,
            &Tensor::zeros(2, 2),
            &Tensor::zeros(2, 2),
            &Tensor::zeros(2, 2),
        )
        .unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_detects_stale_cache() {
        let spec = tiny();
        let p = init_model(&spec, 3).unwrap();
        let x = Tensor::from_rows(&[&[0.3, -0.2]]);
        let f = forward(&spec, &p, &x).unwrap();
        let mut q = p.clone();
        q.values_mut()[0] += 1.0;
        let z = Tensor::zeros(1, 2);
        assert_eq!(
            backward(&spec, &q, &f.cache, &z, &z, &z).unwrap_err(),
            Error::StaleCache
        );
    }

    #[test]
    fn classifier_grad_is_features_t_times_grad_logits() {
        let spec = tiny();
        let p = init_model(&spec, 5).unwrap();
        let x = Tensor::from_rows(&[&[0.4, 0.9], &[-0.7, 0.2]]);
        let f = forward(&spec, &p, &x).unwrap();
        let gl = Tensor::from_rows(&[&[1.0, -0.5], &[0.25, 2.0]]);
        let z = Tensor::zeros(2, 2);
        let g = backward(&spec, &p, &f.cache, &gl, &z, &z).unwrap();
        let h = &f.features;
        let off = p.layer_offset(spec.classifier_layer());
        for i in 0..2 {
            for j in 0..2 {
                let want = h.get(0, i) * gl.get(0, j) + h.get(1, i) * gl.get(1, j);
                assert!((g.values()[off + i * 2 + j] - want).abs() < 1e-15);
            }
        }
        // bias gradient is the column sum
        assert!((g.values()[off + 4] - 1.25).abs() < 1e-15);
        assert!((g.values()[off + 5] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn averaging_basics() {
        let a = pv(&[1.0, 3.0]);
        let b = pv(&[3.0, 5.0]);
        assert_eq!(average_params(&[a.clone(), b.clone()]).unwrap().values(), &[2.0, 4.0]);
        assert_eq!(average_params(&[a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(average_params(&[]).unwrap_err(), Error::EmptyTrajectory);
        let other = pv(&[1.0, 2.0, 3.0]);
        assert!(matches!(average_params(&[a, other]), Err(Error::Layout(_))));
    }

    #[test]
    fn running_mean_basics() {
        let (m, c) = running_mean_update(&pv(&[2.0, 0.0]), 1, &pv(&[4.0, 0.0])).unwrap();
        assert_eq!(m.values(), &[3.0, 0.0]);
        assert_eq!(c, 2);
        let same = pv(&[0.1, -7.3]);
        let (m, _) = running_mean_update(&same, 5, &same).unwrap();
        assert_eq!(m, same);
        assert!(running_mean_update(&same, 1, &pv(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn interpolation_basics() {
        let a = pv(&[0.0, 1.5]);
        let b = pv(&[2.0, -1.0]);
        assert_eq!(interpolate_params(&a, &b, 1.0).unwrap(), a);
        assert_eq!(interpolate_params(&a, &b, 0.0).unwrap(), b);
        assert_eq!(interpolate_params(&a, &b, 0.5).unwrap().values()[0], 1.0);
        assert!(matches!(
            interpolate_params(&a, &b, 1.2),
            Err(Error::Range { name: "alpha", .. })
        ));
    }
}
