//! One configurable training loop covering the proxy/task method, its
//! ablations and the single-model baselines.
//!
//! Every method starts from the same source-pretrained parameters. The
//! proxy is the only model that receives gradients; the task model changes
//! only at fold points, every `k` epochs, where the current proxy is folded
//! into a running mean. The augmentation policy is resampled right after
//! each fold.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::losses::{self, GradRole, Objective};
use crate::nets::{self, Checkpoint, MlpSpec, ParameterVector, ProjectionHead};
use crate::optim::{adam_step, AdamState};
use crate::seed;
use crate::synthdata::{apply_policy, reinit_policy, AugPolicy, GlyphDataset};
use crate::tensor::Tensor;

const TAG_PRETRAIN: u64 = 0x50;
const TAG_SHUFFLE: u64 = 0x51;
const TAG_POLICY: u64 = 0x52;
const TAG_AUG: u64 = 0x53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Erm,
    RandAug,
    Align,
    Peer,
    PeerNoAvg,
    PeerNoReg,
    PeerNoAug,
    Pens,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Erm,
        Method::RandAug,
        Method::Align,
        Method::Peer,
        Method::PeerNoAvg,
        Method::PeerNoReg,
        Method::PeerNoAug,
        Method::Pens,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "ERM",
            Method::RandAug => "RANDAUG",
            Method::Align => "ALIGN",
            Method::Peer => "PEER",
            Method::PeerNoAvg => "PEER_NOAVG",
            Method::PeerNoReg => "PEER_NOREG",
            Method::PeerNoAug => "PEER_NOAUG",
            Method::Pens => "PENS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }

    /// Which of the two recorded models is the method's deliverable.
    pub fn reported_model(self) -> ModelRole {
        match self {
            Method::PeerNoAvg => ModelRole::Proxy,
            _ => ModelRole::Task,
        }
    }

    fn uses_augmentation(self) -> bool {
        !matches!(self, Method::Erm | Method::PeerNoAug)
    }

    fn is_peer(self) -> bool {
        matches!(
            self,
            Method::Peer | Method::PeerNoAvg | Method::PeerNoReg | Method::PeerNoAug
        )
    }

    fn keeps_snapshots(self) -> bool {
        self.is_peer() || self == Method::Pens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelRole {
    Task,
    Proxy,
}

impl ModelRole {
    pub fn name(self) -> &'static str {
        match self {
            ModelRole::Task => "task",
            ModelRole::Proxy => "proxy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    /// Fold / policy-resampling period in epochs.
    pub k: usize,
    /// Weight of the feature regularizer in the proxy objective.
    pub w: f64,
    /// Off-diagonal weight of the Barlow Twins loss.
    pub lambda: f64,
    /// InfoNCE temperature.
    pub tau: f64,
    pub objective: Objective,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub pretrain_epochs: usize,
    /// Evaluation cadence; `None` means every `k` epochs.
    pub eval_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Peer,
            epochs: 100,
            k: 10,
            w: 2.0,
            lambda: 0.005,
            tau: 0.1,
            objective: Objective::BarlowTwins,
            lr: 1e-4,
            batch_size: 128,
            seed: 0,
            pretrain_epochs: 30,
            eval_every: None,
        }
    }
}

impl TrainConfig {
    pub fn eval_period(&self) -> usize {
        self.eval_every.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k < 1 {
            return fail(format!("k ≥ 1 required, got {}", self.k));
        }
        if self.epochs < self.k {
            return fail(format!("epochs ≥ k required, got epochs = {} < k = {}", self.epochs, self.k));
        }
        if self.eval_period() < 1 {
            return fail("eval_every ≥ 1 required".into());
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size ≥ 2 required, got {}", self.batch_size));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr > 0 required, got {}", self.lr));
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return fail(format!("w ≥ 0 required, got {}", self.w));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda ≥ 0 required, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau > 0 required, got {}", self.tau));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub epoch: usize,
    /// Per-domain accuracy, aligned with [`MetricsRecord::domains`].
    pub task_acc: Vec<f64>,
    pub proxy_acc: Vec<f64>,
    /// Mean proxy cross-entropy (sum over views) over the last epoch.
    pub ce_loss: f64,
    /// Mean regularizer value over the last epoch (0 for methods without one).
    pub reg_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub method: Method,
    pub domains: Vec<String>,
    pub points: Vec<EvalPoint>,
}

impl MetricsRecord {
    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == name)
    }

    /// Accuracy sequence of one model on one domain, in evaluation order.
    pub fn series(&self, domain: usize, role: ModelRole) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match role {
                ModelRole::Task => p.task_acc[domain],
                ModelRole::Proxy => p.proxy_acc[domain],
            })
            .collect()
    }

    /// Accuracies of the method's deliverable model at the final point.
    pub fn final_reported(&self) -> Option<&[f64]> {
        self.points.last().map(|p| match self.method.reported_model() {
            ModelRole::Task => p.task_acc.as_slice(),
            ModelRole::Proxy => p.proxy_acc.as_slice(),
        })
    }
}

/// The only channel through which evaluation domains reach a run.
pub trait EvalHook {
    fn domain_names(&self) -> Vec<String>;
    fn accuracies(&self, spec: &MlpSpec, params: &ParameterVector) -> Result<Vec<f64>>;
}

/// Evaluates on a fixed list of datasets (source first, then targets).
pub struct DomainEvaluator<'a> {
    domains: Vec<&'a GlyphDataset>,
}

impl<'a> DomainEvaluator<'a> {
    pub fn new(domains: Vec<&'a GlyphDataset>) -> Self {
        Self { domains }
    }
}

impl EvalHook for DomainEvaluator<'_> {
    fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.domain.name.clone()).collect()
    }

    fn accuracies(&self, spec: &MlpSpec, params: &ParameterVector) -> Result<Vec<f64>> {
        self.domains.iter().map(|d| evaluate(params, spec, d)).collect()
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax logit (lowest index on ties) matches
/// the label.
pub fn evaluate(params: &ParameterVector, spec: &MlpSpec, dataset: &GlyphDataset) -> Result<f64> {
    Ok(evaluate_loss(params, spec, dataset)?.1)
}

/// (mean cross-entropy, accuracy).
pub fn evaluate_loss(params: &ParameterVector, spec: &MlpSpec, dataset: &GlyphDataset) -> Result<(f64, f64)> {
    let logits = nets::predict(spec, params, &dataset.x)?;
    if dataset.is_empty() {
        return Ok((0.0, 0.0));
    }
    let ce = losses::cross_entropy(&logits, &dataset.y)?.value;
    let hits = (0..logits.rows())
        .filter(|&i| argmax(logits.row(i)) == dataset.y[i])
        .count();
    Ok((ce, hits as f64 / dataset.len() as f64))
}

fn batches(n: usize, batch_size: usize, parts: &[u64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(parts));
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

fn zeros(n: usize, c: usize) -> Tensor {
    Tensor::zeros(n, c)
}

/// Plain cross-entropy on the un-augmented source, starting from the
/// seeded initialization. Returns the starting point of every method.
pub fn pretrain(spec: &MlpSpec, source: &GlyphDataset, cfg: &TrainConfig) -> Result<ParameterVector> {
    let mut params = nets::init_model(spec, cfg.seed)?;
    let mut adam = AdamState::new(&params);
    for epoch in 0..cfg.pretrain_epochs {
        for idx in batches(source.len(), cfg.batch_size, &[cfg.seed, TAG_PRETRAIN, epoch as u64]) {
            let x = source.x.select_rows(&idx);
            let y: Vec<usize> = idx.iter().map(|&i| source.y[i]).collect();
            let f = nets::forward(spec, &params, &x)?;
            let ce = losses::cross_entropy(&f.logits, &y)?;
            let n = x.rows();
            let g = nets::backward(
                spec,
                &params,
                &f.cache,
                &ce.grads[&GradRole::Logits],
                &zeros(n, spec.proj_dim()),
                &zeros(n, spec.feature_dim),
            )?;
            adam_step(&mut params, &g, &mut adam, cfg.lr)?;
        }
    }
    Ok(params)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The source-pretrained starting point shared by task and proxy.
    pub initial: ParameterVector,
    pub task: Checkpoint,
    pub proxy: Checkpoint,
    pub metrics: MetricsRecord,
    /// Proxy snapshots taken at fold points, for methods that take them.
    pub snapshots: Option<Vec<ParameterVector>>,
}

impl RunOutput {
    pub fn reported(&self) -> &Checkpoint {
        match self.metrics.method.reported_model() {
            ModelRole::Task => &self.task,
            ModelRole::Proxy => &self.proxy,
        }
    }
}

struct StepLoss {
    ce: f64,
    reg: f64,
}

struct Loop<'a> {
    cfg: &'a TrainConfig,
    spec: &'a MlpSpec,
}

impl Loop<'_> {
    fn backward_logits(&self, params: &ParameterVector, pass: &nets::ForwardPass, gl: &Tensor, gf: Option<&Tensor>) -> Result<ParameterVector> {
        let n = gl.rows();
        let zf;
        let gf = match gf {
            Some(g) => g,
            None => {
                zf = zeros(n, self.spec.feature_dim);
                &zf
            }
        };
        nets::backward(self.spec, params, &pass.cache, gl, &zeros(n, self.spec.proj_dim()), gf)
    }

    /// One gradient step of the proxy (or single model) on a batch.
    fn step(
        &self,
        proxy: &mut ParameterVector,
        adam: &mut AdamState,
        regulator: &ParameterVector,
        x: &Tensor,
        xbar: &Tensor,
        y: &[usize],
    ) -> Result<StepLoss> {
        let spec = self.spec;
        let cfg = self.cfg;
        let method = cfg.method;
        let (grads, loss) = match method {
            Method::Erm => {
                let f = nets::forward(spec, proxy, x)?;
                let ce = losses::cross_entropy(&f.logits, y)?;
                let g = self.backward_logits(proxy, &f, &ce.grads[&GradRole::Logits], None)?;
                (g, StepLoss { ce: ce.value, reg: 0.0 })
            }
            Method::RandAug | Method::Pens => {
                let fx = nets::forward(spec, proxy, x)?;
                let fb = nets::forward(spec, proxy, xbar)?;
                let ce_x = losses::cross_entropy(&fx.logits, y)?;
                let ce_b = losses::cross_entropy(&fb.logits, y)?;
                let mut g = self.backward_logits(proxy, &fx, &ce_x.grads[&GradRole::Logits], None)?;
                g.add_scaled(&self.backward_logits(proxy, &fb, &ce_b.grads[&GradRole::Logits], None)?, 1.0)?;
                (g, StepLoss { ce: ce_x.value + ce_b.value, reg: 0.0 })
            }
            Method::Align => {
                let fx = nets::forward(spec, proxy, x)?;
                let fb = nets::forward(spec, proxy, xbar)?;
                let ce = losses::cross_entropy(&fx.logits, y)?;
                let align = losses::info_nce(&fx.features, &fb.features, cfg.tau)?;
                let ga = align.grads[&GradRole::ZA].scale(cfg.w);
                let gb = align.grads[&GradRole::ZB].scale(cfg.w);
                let mut g = self.backward_logits(proxy, &fx, &ce.grads[&GradRole::Logits], Some(&ga))?;
                let zl = zeros(x.rows(), spec.num_classes);
                g.add_scaled(&self.backward_logits(proxy, &fb, &zl, Some(&gb))?, 1.0)?;
                (g, StepLoss { ce: ce.value, reg: align.value })
            }
            Method::Peer | Method::PeerNoAvg | Method::PeerNoReg | Method::PeerNoAug => {
                let w = if method == Method::PeerNoReg { 0.0 } else { cfg.w };
                let fx = nets::forward(spec, proxy, x)?;
                let fb = nets::forward(spec, proxy, xbar)?;
                let h_task = nets::encode(spec, regulator, x)?;
                let head = ProjectionHead::new(spec, proxy)?;
                let reg_param = match cfg.objective {
                    Objective::BarlowTwins => cfg.lambda,
                    Objective::InfoNce => cfg.tau,
                };
                let reg = losses::peer_regularizer(&h_task, &fb.features, &head, cfg.objective, reg_param)?;
                let obj = losses::proxy_objective(&fx.logits, &fb.logits, y, &reg, w)?;
                let head_range = head.param_range();
                let mut g = self.backward_logits(proxy, &fx, &obj.grads[&GradRole::LogitsX], None)?;
                g.add_scaled(
                    &self.backward_logits(
                        proxy,
                        &fb,
                        &obj.grads[&GradRole::LogitsXbar],
                        Some(&obj.grads[&GradRole::HProxy]),
                    )?,
                    1.0,
                )?;
                for (acc, v) in g.values_mut()[head_range]
                    .iter_mut()
                    .zip(obj.grads[&GradRole::ProjParams].data())
                {
                    *acc += v;
                }
                (
                    g,
                    StepLoss {
                        ce: obj.value - w * reg.value,
                        reg: reg.value,
                    },
                )
            }
        };
        adam_step(proxy, &grads, adam, cfg.lr)?;
        Ok(loss)
    }
}

/// Pretrains on the source, then runs the configured method.
pub fn run(cfg: &TrainConfig, spec: &MlpSpec, source: &GlyphDataset, eval: &dyn EvalHook) -> Result<RunOutput> {
    cfg.validate()?;
    let initial = pretrain(spec, source, cfg)?;
    run_from(cfg, spec, source, eval, initial)
}

/// Runs the configured method from given pretrained parameters.
pub fn run_from(
    cfg: &TrainConfig,
    spec: &MlpSpec,
    source: &GlyphDataset,
    eval: &dyn EvalHook,
    initial: ParameterVector,
) -> Result<RunOutput> {
    cfg.validate()?;
    spec.validate()?;
    let method = cfg.method;
    let lp = Loop { cfg, spec };
    let mut proxy = initial.clone();
    let mut adam = AdamState::new(&proxy);
    // Regulator for the proxy methods; the reported model for PENS.
    let mut task = initial.clone();
    let mut folds = 0usize;
    let mut snapshots: Vec<ParameterVector> = Vec::new();
    let mut policy: AugPolicy = reinit_policy(seed::derive(&[cfg.seed, TAG_POLICY, 0]));
    let domains = eval.domain_names();
    let mut points = Vec::new();

    for epoch in 1..=cfg.epochs {
        let mut ce_sum = 0.0;
        let mut reg_sum = 0.0;
        let plan = batches(source.len(), cfg.batch_size, &[cfg.seed, TAG_SHUFFLE, epoch as u64]);
        for (b, idx) in plan.iter().enumerate() {
            let x = source.x.select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| source.y[i]).collect();
            let xbar = if method.uses_augmentation() {
                apply_policy(&policy, &x, seed::derive(&[cfg.seed, TAG_AUG, epoch as u64, b as u64]))?
            } else {
                x.clone()
            };
            let l = lp.step(&mut proxy, &mut adam, &task, &x, &xbar, &y)?;
            ce_sum += l.ce;
            reg_sum += l.reg;
        }
        let nb = plan.len().max(1) as f64;

        if epoch % cfg.k == 0 {
            if method.keeps_snapshots() {
                snapshots.push(proxy.clone());
            }
            match method {
                Method::Peer | Method::PeerNoReg | Method::PeerNoAug | Method::Pens => {
                    if folds == 0 {
                        task = proxy.clone();
                        folds = 1;
                    } else {
                        let (mean, count) = nets::running_mean_update(&task, folds, &proxy)?;
                        task = mean;
                        folds = count;
                    }
                }
                Method::PeerNoAvg => {
                    task = proxy.clone();
                    folds += 1;
                }
                _ => {}
            }
            if method.uses_augmentation() {
                policy = reinit_policy(seed::derive(&[cfg.seed, TAG_POLICY, (epoch / cfg.k) as u64]));
            }
        }

        if epoch % cfg.eval_period() == 0 || epoch == cfg.epochs {
            let proxy_acc = eval.accuracies(spec, &proxy)?;
            let task_acc = match method {
                Method::Erm | Method::RandAug | Method::Align => proxy_acc.clone(),
                Method::Pens if folds == 0 => proxy_acc.clone(),
                _ => eval.accuracies(spec, &task)?,
            };
            points.push(EvalPoint {
                epoch,
                task_acc,
                proxy_acc,
                ce_loss: ce_sum / nb,
                reg_loss: reg_sum / nb,
            });
        }
    }

    let task_params = match method {
        Method::Erm | Method::RandAug | Method::Align => proxy.clone(),
        Method::Pens => nets::average_params(&snapshots)?,
        _ => task,
    };
    let ckpt = |params: ParameterVector, role: ModelRole| Checkpoint {
        spec: spec.clone(),
        params,
        epoch: cfg.epochs,
        method_tag: format!("{}:{}", method.name(), role.name()),
        seed: cfg.seed,
    };
    Ok(RunOutput {
        initial,
        task: ckpt(task_params, ModelRole::Task),
        proxy: ckpt(proxy, ModelRole::Proxy),
        metrics: MetricsRecord {
            method,
            domains,
            points,
        },
        snapshots: method.keeps_snapshots().then_some(snapshots),
    })
}
