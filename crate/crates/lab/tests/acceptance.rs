//! The ten acceptance criteria, one test each. Every test prints a single
//! `criterion N ... PASS|FAIL` line (written straight to stdout so it shows
//! even when the harness captures output), then asserts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use peer_core::diagnostics::{
    barrier_scan, dataset_distance, layerwise_cka, linear_cka, sinkhorn, spearman, DISTANCE_MAX_ITER, DISTANCE_TOL,
};
use peer_core::losses::{
    barlow_twins, cross_entropy, info_nce, peer_regularizer, proxy_objective, GradRole, Objective,
};
use peer_core::nets::{average_params, init_model, running_mean_update, LayerShape, ParameterVector, ProjectionHead};
use peer_core::synthdata::{default_roster, generate_domain, DomainSpec, GlyphDataset};
use peer_core::tensor::{finite_diff_grad, matmul};
use peer_core::trainer::{evaluate_loss, run, DomainEvaluator, Method, TrainConfig};
use peer_core::{MlpSpec, Tensor};
use peerlab::analyze::noise_view;
use peerlab::checkpoint;
use peerlab::config::RunConfig;
use peerlab::report::{collect, RunSummary};
use peerlab::run::{parse_grid, sweep};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, title: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2} {title:<28} {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    peer_core::seed::rng(&[seed, 0xACCE])
}

fn rand_tensor(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| r.random_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

fn rand_pv(r: &mut ChaCha8Rng, layout: Vec<LayerShape>, scale: f64) -> ParameterVector {
    let n: usize = layout.iter().map(|s| s.len()).sum();
    ParameterVector::new(layout, (0..n).map(|_| r.random_range(-scale..scale)).collect()).unwrap()
}

fn labels(r: &mut ChaCha8Rng, n: usize, c: usize) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..c)).collect()
}

fn with_data(t: &Tensor, d: &[f64]) -> Tensor {
    Tensor::from_vec(t.rows(), t.cols(), d.to_vec()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

/// Worst elementwise relative error, over entries where either side is
/// above 1e-6; smaller entries must agree to 1e-8 absolute or count as
/// infinitely wrong.
fn grad_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            if a.abs().max(n.abs()) > 1e-6 {
                rel(a, n)
            } else if (a - n).abs() < 1e-8 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn tiny_spec() -> MlpSpec {
    MlpSpec {
        input_dim: 4,
        encoder_dims: vec![5],
        feature_dim: 3,
        num_classes: 3,
        proj_dims: vec![4, 3],
    }
}

#[test]
fn criterion_01_gradients() {
    const H: f64 = 1e-5;
    const INSTANCES: u64 = 24;
    let start = Instant::now();
    let spec = tiny_spec();
    let mut worst = [0.0f64; 5];
    for s in 0..INSTANCES {
        let mut r = rng(s);
        let n = r.random_range(3..7);

        let c = r.random_range(2..6);
        let logits = rand_tensor(&mut r, n, c, 3.0);
        let y = labels(&mut r, n, c);
        let an = cross_entropy(&logits, &y).unwrap();
        let num = finite_diff_grad(|p| cross_entropy(&with_data(&logits, p), &y).unwrap().value, logits.data(), H)
            .unwrap();
        worst[0] = worst[0].max(grad_err(an.grad(GradRole::Logits).unwrap().data(), &num));

        let d = r.random_range(1..5);
        let za = rand_tensor(&mut r, n, d, 1.0);
        let zb = rand_tensor(&mut r, n, d, 1.0);
        let an = barlow_twins(&za, &zb, 0.005).unwrap();
        let ga = finite_diff_grad(|p| barlow_twins(&with_data(&za, p), &zb, 0.005).unwrap().value, za.data(), H)
            .unwrap();
        let gb = finite_diff_grad(|p| barlow_twins(&za, &with_data(&zb, p), 0.005).unwrap().value, zb.data(), H)
            .unwrap();
        worst[1] = worst[1]
            .max(grad_err(an.grad(GradRole::ZA).unwrap().data(), &ga))
            .max(grad_err(an.grad(GradRole::ZB).unwrap().data(), &gb));

        let d = r.random_range(2..5);
        let za = rand_tensor(&mut r, n, d, 1.0);
        let zb = rand_tensor(&mut r, n, d, 1.0);
        let an = info_nce(&za, &zb, 0.1).unwrap();
        let ga = finite_diff_grad(|p| info_nce(&with_data(&za, p), &zb, 0.1).unwrap().value, za.data(), H).unwrap();
        let gb = finite_diff_grad(|p| info_nce(&za, &with_data(&zb, p), 0.1).unwrap().value, zb.data(), H).unwrap();
        worst[2] = worst[2]
            .max(grad_err(an.grad(GradRole::ZA).unwrap().data(), &ga))
            .max(grad_err(an.grad(GradRole::ZB).unwrap().data(), &gb));

        let params = rand_pv(&mut r, spec.layout(), 0.9);
        let h_task = rand_tensor(&mut r, n, spec.feature_dim, 1.5);
        let h_proxy = rand_tensor(&mut r, n, spec.feature_dim, 1.5);
        let (obj, arg) = if s % 2 == 0 {
            (Objective::BarlowTwins, 0.005)
        } else {
            (Objective::InfoNce, 0.1)
        };
        let head = ProjectionHead::new(&spec, &params).unwrap();
        let reg_at = |pv: &ParameterVector, hp: &Tensor| {
            let head = ProjectionHead::new(&spec, pv).unwrap();
            peer_regularizer(&h_task, hp, &head, obj, arg).unwrap().value
        };
        let an = peer_regularizer(&h_task, &h_proxy, &head, obj, arg).unwrap();
        let gh = finite_diff_grad(|p| reg_at(&params, &with_data(&h_proxy, p)), h_proxy.data(), H).unwrap();
        let gp = finite_diff_grad(
            |p| reg_at(&ParameterVector::new(params.layout().to_vec(), p.to_vec()).unwrap(), &h_proxy),
            params.values(),
            H,
        )
        .unwrap();
        let range = head.param_range();
        worst[3] = worst[3]
            .max(grad_err(an.grad(GradRole::HProxy).unwrap().data(), &gh))
            .max(grad_err(an.grad(GradRole::ProjParams).unwrap().data(), &gp[range]));

        let lx = rand_tensor(&mut r, n, spec.num_classes, 2.0);
        let lb = rand_tensor(&mut r, n, spec.num_classes, 2.0);
        let y = labels(&mut r, n, spec.num_classes);
        let w = [0.0, 0.5, 2.0][s as usize % 3];
        let reg_of = |hp: &Tensor| peer_regularizer(&h_task, hp, &head, Objective::BarlowTwins, 0.005).unwrap();
        let reg = reg_of(&h_proxy);
        let an = proxy_objective(&lx, &lb, &y, &reg, w).unwrap();
        let gx = finite_diff_grad(|p| proxy_objective(&with_data(&lx, p), &lb, &y, &reg, w).unwrap().value, lx.data(), H)
            .unwrap();
        let gb = finite_diff_grad(|p| proxy_objective(&lx, &with_data(&lb, p), &y, &reg, w).unwrap().value, lb.data(), H)
            .unwrap();
        let gh = finite_diff_grad(
            |p| proxy_objective(&lx, &lb, &y, &reg_of(&with_data(&h_proxy, p)), w).unwrap().value,
            h_proxy.data(),
            H,
        )
        .unwrap();
        worst[4] = worst[4]
            .max(grad_err(an.grad(GradRole::LogitsX).unwrap().data(), &gx))
            .max(grad_err(an.grad(GradRole::LogitsXbar).unwrap().data(), &gb))
            .max(grad_err(an.grad(GradRole::HProxy).unwrap().data(), &gh));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|&e| e < 1e-4) && secs < 30.0;
    verdict(
        1,
        "gradient suite",
        pass,
        &format!(
            "{INSTANCES} instances each; worst rel err ce {:.1e} bt {:.1e} infonce {:.1e} reg {:.1e} proxy {:.1e}; {secs:.1}s",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    );
}

#[test]
fn criterion_02_averaging() {
    let mut worst_fold = 0.0f64;
    for n in 1..=64usize {
        let mut r = rng(1000 + n as u64);
        let layout = vec![LayerShape { fan_in: 3, fan_out: 4 }];
        let snaps: Vec<ParameterVector> = (0..n).map(|_| rand_pv(&mut r, layout.clone(), 5.0)).collect();
        let mut mean = snaps[0].clone();
        let mut count = 1;
        for s in &snaps[1..] {
            (mean, count) = running_mean_update(&mean, count, s).unwrap();
        }
        let batch = average_params(&snaps).unwrap();
        for (a, b) in mean.values().iter().zip(batch.values()) {
            worst_fold = worst_fold.max(rel(*a, *b));
        }
    }

    // A real PEER run: every fold snapshot goes through a checkpoint file
    // and back before averaging.
    let spec = MlpSpec::default();
    let src = generate_domain(&default_roster()[0], 128, 0).unwrap();
    let cfg = TrainConfig {
        method: Method::Peer,
        epochs: 12,
        k: 3,
        batch_size: 32,
        pretrain_epochs: 2,
        lr: 1e-3,
        seed: 9,
        ..TrainConfig::default()
    };
    let eval = DomainEvaluator::new(vec![&src]);
    let out = run(&cfg, &spec, &src, &eval).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let snaps = out.snapshots.as_ref().unwrap();
    let reloaded: Vec<ParameterVector> = snaps
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let path = dir.path().join(format!("snap{i}.ckpt"));
            let ck = peer_core::Checkpoint {
                spec: spec.clone(),
                params: p.clone(),
                epoch: (i + 1) * cfg.k,
                method_tag: "PEER:snapshot".into(),
                seed: cfg.seed,
            };
            checkpoint::save(&path, &ck).unwrap();
            checkpoint::load(&path).unwrap().params
        })
        .collect();
    let batch = average_params(&reloaded).unwrap();
    let worst_run = out
        .task
        .params
        .values()
        .iter()
        .zip(batch.values())
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    let pass = worst_fold < 1e-9 && worst_run < 1e-9 && reloaded.len() == 4;
    verdict(
        2,
        "averaging equivalence",
        pass,
        &format!(
            "n=1..64 fold vs batch {worst_fold:.1e}; PEER task vs mean of {} saved snapshots {worst_run:.1e}",
            reloaded.len()
        ),
    );
}

#[test]
fn criterion_03_loss_identities() {
    // Zero-mean orthogonal ±1 columns give M = I exactly.
    let z = Tensor::from_rows(&[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]]);
    let bt_identity = barlow_twins(&z, &z, 0.005).unwrap().value;
    let z1 = Tensor::from_rows(&[&[1.0], &[-2.0], &[0.5], &[3.0]]);
    let bt_anti = barlow_twins(&z1, &z1.scale(-1.0), 0.005).unwrap().value;
    let nce_single = info_nce(&Tensor::from_rows(&[&[0.3, -1.0, 2.0]]), &Tensor::from_rows(&[&[1.0, 0.2, 0.1]]), 0.1)
        .unwrap()
        .value;

    let spec = tiny_spec();
    let mut worst_w0 = 0.0f64;
    for s in 0..24 {
        let mut r = rng(3000 + s);
        let n = r.random_range(3..7);
        let params = rand_pv(&mut r, spec.layout(), 0.9);
        let head = ProjectionHead::new(&spec, &params).unwrap();
        let reg = peer_regularizer(
            &rand_tensor(&mut r, n, 3, 1.0),
            &rand_tensor(&mut r, n, 3, 1.0),
            &head,
            Objective::BarlowTwins,
            0.005,
        )
        .unwrap();
        let lx = rand_tensor(&mut r, n, 3, 2.0);
        let lb = rand_tensor(&mut r, n, 3, 2.0);
        let y = labels(&mut r, n, 3);
        let obj = proxy_objective(&lx, &lb, &y, &reg, 0.0).unwrap().value;
        let ce = cross_entropy(&lx, &y).unwrap().value + cross_entropy(&lb, &y).unwrap().value;
        worst_w0 = worst_w0.max((obj - ce).abs());
    }
    let pass = bt_identity.abs() < 1e-12 && (bt_anti - 4.0).abs() < 1e-6 && nce_single == 0.0 && worst_w0 < 1e-12;
    verdict(
        3,
        "loss identities",
        pass,
        &format!(
            "bt(M=I) {bt_identity:.1e}; bt(d=1 anti) {bt_anti:.9}; infonce(N=1) {nce_single}; |obj(w=0) - ce| {worst_w0:.1e}"
        ),
    );
}

fn orthogonal(r: &mut ChaCha8Rng, d: usize) -> Tensor {
    let m = rand_tensor(r, d, d, 1.0);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut v: Vec<f64> = (0..d).map(|i| m.get(i, j)).collect();
        for q in &cols {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut q = Tensor::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            q.set(i, j, *v);
        }
    }
    q
}

fn small_benchmark(n: usize) -> Vec<GlyphDataset> {
    default_roster().iter().map(|d| generate_domain(d, n, 3).unwrap()).collect()
}

#[test]
fn criterion_04_cka() {
    let (mut self_err, mut orth_err, mut scale_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut in_range = true;
    for s in 0..50 {
        let mut r = rng(4000 + s);
        let x = rand_tensor(&mut r, 24, 5, 1.0);
        let y = rand_tensor(&mut r, 24, 4, 1.0);
        let base = linear_cka(&x, &y).unwrap();
        in_range &= (0.0..=1.0 + 1e-9).contains(&base);
        self_err = self_err.max((linear_cka(&x, &x).unwrap() - 1.0).abs());
        let q = orthogonal(&mut r, 5);
        orth_err = orth_err.max((linear_cka(&matmul(&x, &q).unwrap(), &y).unwrap() - base).abs());
        let c = r.random_range(0.01..100.0);
        scale_err = scale_err.max((linear_cka(&x, &y.scale(c)).unwrap() - base).abs());
    }
    let spec = MlpSpec::default();
    let probe = &small_benchmark(96)[0];
    let models: Vec<ParameterVector> = (1..=3).map(|s| init_model(&spec, s).unwrap()).collect();
    for a in &models {
        for b in &models {
            let m = layerwise_cka(&spec, a, b, probe).unwrap();
            in_range &= m.values.data().iter().all(|v| (0.0..=1.0 + 1e-9).contains(v));
            if a == b {
                let (n, _) = m.size();
                self_err = (0..n).map(|i| (m.values.get(i, i) - 1.0).abs()).fold(self_err, f64::max);
            }
        }
    }
    let pass = self_err < 1e-9 && orth_err < 1e-6 && scale_err < 1e-6 && in_range;
    verdict(
        4,
        "CKA properties",
        pass,
        &format!("self {self_err:.1e}; orthogonal {orth_err:.1e}; scale {scale_err:.1e}; entries in [0, 1+1e-9]: {in_range}"),
    );
}

#[test]
fn criterion_05_barrier_endpoints() {
    let spec = MlpSpec::default();
    let data = small_benchmark(64);
    let refs: Vec<&GlyphDataset> = data.iter().collect();
    let a = init_model(&spec, 5).unwrap();
    let b = init_model(&spec, 6).unwrap();
    let curve = barrier_scan(&spec, &a, &b, 11, &refs).unwrap();
    let last = curve.alphas.len() - 1;
    let mut exact = curve.alphas[0] == 0.0 && curve.alphas[last] == 1.0;
    for (d, ds) in data.iter().enumerate() {
        // α weights the first argument, so α = 0 is `b` and α = 1 is `a`.
        let (lb, ab) = evaluate_loss(&b, &spec, ds).unwrap();
        let (la, aa) = evaluate_loss(&a, &spec, ds).unwrap();
        exact &= curve.loss[d][0].to_bits() == lb.to_bits() && curve.accuracy[d][0].to_bits() == ab.to_bits();
        exact &= curve.loss[d][last].to_bits() == la.to_bits() && curve.accuracy[d][last].to_bits() == aa.to_bits();
    }
    let flat = barrier_scan(&spec, &a, &a, 11, &refs).unwrap();
    let heights: Vec<f64> = (0..data.len()).map(|d| flat.barrier_height(d)).collect();
    let pass = exact && heights.iter().all(|&h| h == 0.0);
    verdict(
        5,
        "barrier endpoints",
        pass,
        &format!("endpoints bit-exact on {} domains: {exact}; identical-endpoint heights {heights:?}", data.len()),
    );
}

#[test]
fn criterion_06_sinkhorn() {
    let u = [1.0 / 3.0; 3];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let (mut worst_lp, mut worst_marg, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
    let mut instances = 0;
    for reg in [1e-2, 1e-3] {
        for s in 0..100 {
            let mut r = rng(6000 + s);
            let raw = rand_tensor(&mut r, 3, 3, 1.0).map(|v| v + 1.5);
            let mean = raw.data().iter().sum::<f64>() / 9.0;
            let c = raw.scale(1.0 / mean);
            let lp = perms
                .iter()
                .map(|p| (0..3).map(|i| c.get(i, p[i])).sum::<f64>() / 3.0)
                .fold(f64::INFINITY, f64::min);
            let sol = sinkhorn(&c, &u, &u, reg, DISTANCE_MAX_ITER, DISTANCE_TOL).unwrap();
            worst_lp = worst_lp.max(rel(sol.transport_cost, lp));
            for i in 0..3 {
                let row: f64 = sol.plan.row(i).iter().sum();
                let col: f64 = (0..3).map(|k| sol.plan.get(k, i)).sum();
                worst_marg = worst_marg.max((row - u[i]).abs()).max((col - u[i]).abs());
            }
            // Symmetric cost: A→B and B→A are the same problem.
            let sym = c.add(&c.transpose()).unwrap().scale(0.5);
            let ab = sinkhorn(&sym, &u, &u, reg, DISTANCE_MAX_ITER, DISTANCE_TOL).unwrap();
            let ba = sinkhorn(&sym.transpose(), &u, &u, reg, DISTANCE_MAX_ITER, DISTANCE_TOL).unwrap();
            worst_sym = worst_sym.max((ab.transport_cost - ba.transport_cost).abs());
            instances += 1;
        }
    }
    let data = small_benchmark(48);
    let d_ab = dataset_distance(&data[0], &data[2], 1e-2).unwrap();
    let d_ba = dataset_distance(&data[2], &data[0], 1e-2).unwrap();
    let dist_sym = (d_ab - d_ba).abs();
    let pass = worst_lp < 0.02 && worst_marg <= DISTANCE_TOL && worst_sym < 1e-9 && dist_sym < 1e-9;
    verdict(
        6,
        "Sinkhorn correctness",
        pass,
        &format!(
            "{instances} 3x3 instances (reg 1e-2, 1e-3): worst LP gap {:.3}%; marginal err {worst_marg:.1e}; symmetry {worst_sym:.1e}; dataset distance symmetry {dist_sym:.1e}",
            100.0 * worst_lp
        ),
    );
}

struct MethodSweep {
    secs: f64,
    runs: Vec<RunSummary>,
}

impl MethodSweep {
    fn get(&self, label: &str, seed: u64) -> &RunSummary {
        self.runs
            .iter()
            .find(|r| r.label == label && r.seed == seed)
            .unwrap_or_else(|| panic!("no run {label} seed {seed}"))
    }
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// RANDAUG, PEER, PENS and PEER_NOAVG on the default benchmark and default
/// settings, seeds 1..5, single worker. Shared by criteria 7 and 9.
fn method_sweep() -> &'static MethodSweep {
    static CELL: OnceLock<MethodSweep> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let grid = [parse_grid("method=RANDAUG,PEER,PENS,PEER_NOAVG").unwrap()];
        let start = Instant::now();
        let summary = sweep(&RunConfig::default(), &grid, &SEEDS, None, dir.path(), 1).unwrap();
        let secs = start.elapsed().as_secs_f64();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        MethodSweep {
            secs,
            runs: collect(dir.path()).unwrap(),
        }
    })
}

#[test]
fn criterion_07_peer_vs_randaug() {
    let s = method_sweep();
    let mut acc_wins = 0;
    let mut fluct_wins = 0;
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let ra = s.get("RANDAUG", seed);
        let pe = s.get("PEER", seed);
        acc_wins += (pe.mean_accuracy() > ra.mean_accuracy()) as u32;
        fluct_wins += (pe.mean_fluctuation() < ra.mean_fluctuation()) as u32;
        per_seed.push(format!(
            "s{seed} acc {:.2}/{:.2} var {:.2}/{:.2}",
            pe.mean_accuracy(),
            ra.mean_accuracy(),
            pe.mean_fluctuation(),
            ra.mean_fluctuation()
        ));
    }
    let pass = acc_wins >= 4 && fluct_wins >= 4 && s.secs < 600.0;
    verdict(
        7,
        "PEER vs RANDAUG",
        pass,
        &format!(
            "acc wins {acc_wins}/5, fluctuation wins {fluct_wins}/5, sweep {:.0}s (PEER/RANDAUG: {})",
            s.secs,
            per_seed.join("; ")
        ),
    );
}

#[test]
fn criterion_08_distance_trend() {
    let start = Instant::now();
    let clean = generate_domain(&DomainSpec::identity("source"), 128, 1).unwrap();
    let mags = [0.1, 0.4, 0.7, 1.0];
    let d: Vec<f64> = mags
        .iter()
        .map(|&m| dataset_distance(&clean, &noise_view(&clean, m, 11).unwrap(), 1e-2).unwrap())
        .collect();
    let rho = spearman(&mags, &d);
    let secs = start.elapsed().as_secs_f64();
    let strictly = d.windows(2).all(|w| w[1] > w[0]);
    verdict(
        8,
        "distance vs noise magnitude",
        strictly && rho == 1.0 && secs < 60.0,
        &format!("distances {d:.4?}; spearman {rho}; {secs:.1}s"),
    );
}

#[test]
fn criterion_09_ablations() {
    let s = method_sweep();
    let mut pens_ok = 0;
    let mut noavg_ok = 0;
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let ra = s.get("RANDAUG", seed);
        let pe = s.get("PEER", seed);
        let pens = s.get("PENS", seed);
        let na = s.get("PEER_NOAVG", seed);
        pens_ok += (pens.mean_accuracy() <= pe.mean_accuracy()) as u32;
        noavg_ok += (na.mean_fluctuation() <= ra.mean_fluctuation() && na.mean_accuracy() <= pe.mean_accuracy()) as u32;
        per_seed.push(format!(
            "s{seed} pens {:.2} noavg {:.2} (var {:.2})",
            pens.mean_accuracy(),
            na.mean_accuracy(),
            na.mean_fluctuation()
        ));
    }
    verdict(
        9,
        "averaging/regularizer ablations",
        pens_ok >= 4 && noavg_ok >= 4,
        &format!("PENS <= PEER {pens_ok}/5; NOAVG var <= RANDAUG and acc <= PEER {noavg_ok}/5 ({})", per_seed.join("; ")),
    );
}

fn peerlab(args: &[&str], workers: &str) {
    let out = Command::new(env!("CARGO_BIN_EXE_peerlab"))
        .args(args)
        .env("PEERLAB_WORKERS", workers)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// CSV files below `root`, as sorted paths relative to it.
fn csv_files(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p);
            }
        }
    }
    let mut out = Vec::new();
    walk(root, &mut out);
    let mut rel: Vec<PathBuf> = out.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect();
    rel.sort();
    rel
}

/// generate-data, sweep, report and every analysis; `workers` varies the
/// sweep schedule between repetitions.
fn pipeline(root: &Path, workers: &str) {
    let s = |p: PathBuf| p.display().to_string();
    let cfg = root.join("run.cfg");
    fs::write(&cfg, "epochs = 6\nk = 2\npretrain_epochs = 3\nbatch_size = 32\n").unwrap();
    let data = s(root.join("data"));
    peerlab(
        &["generate-data", "--out", &data, "--seed", "2", "--source-size", "128", "--target-size", "64"],
        workers,
    );
    let sw = root.join("sweep");
    peerlab(
        &[
            "sweep", "--config", &s(cfg), "--grid", "method=ERM,PEER,PENS", "--grid", "w=0.5,2", "--seeds", "1,2",
            "--data", &data, "--out", &s(sw.clone()),
        ],
        workers,
    );
    peerlab(&["report", "--in", &s(sw.clone()), "--out", &s(root.join("report"))], workers);
    let run = sw.join("cells/PEER_w=2_seed1");
    let (a, b) = (s(run.join("initial.ckpt")), s(run.join("task.ckpt")));
    let an = root.join("analysis");
    peerlab(&["analyze", "cka", "--a", &a, "--b", &b, "--data", &data, "--out", &s(an.join("cka.csv"))], workers);
    peerlab(
        &["analyze", "barrier", "--a", &a, "--b", &b, "--data", &data, "--out", &s(an.join("barrier.csv"))],
        workers,
    );
    peerlab(&["analyze", "distance", "--data", &data, "--size", "64", "--out", &s(an.join("distance.csv"))], workers);
    peerlab(
        &["analyze", "fluctuation", "--metrics", &s(run.join("metrics.csv")), "--out", &s(an.join("fluct.csv"))],
        workers,
    );
}

#[test]
fn criterion_10_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    let files = csv_files(a.path());
    let same_set = files == csv_files(b.path());
    let differing: Vec<String> = files
        .iter()
        .filter(|f| fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).ok().unwrap_or_default())
        .map(|f| f.display().to_string())
        .collect();
    verdict(
        10,
        "determinism",
        same_set && differing.is_empty() && files.len() > 20,
        &format!("{} CSV files compared across two invocations (1 and 3 workers); differing: {differing:?}", files.len()),
    );
}
