//! Self-checks of every numerical invariant, runnable from the command line.
//!
//! Each suite draws its random instances from a fixed seed and reports one
//! [`Check`] per property: the measured worst-case value next to the bound it
//! must respect.

use std::time::{Duration, Instant};

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::{
    assign_labels, clustering_energy, incremental_update, init_codebook, kmeans_plus_plus, lloyd_cluster, quantize,
    reconstruct, separation_gradient, separation_loss, update_centers, Codebook, PseudoCodebook,
};
use crate::error::{RecastError, Result};
use crate::forecaster::{
    forward, forward_batch, prepare_window, quant_path_backward, quant_path_forward, training_loss, DualPathModel,
    ModelDims, QuantHead,
};
use crate::nn::{adam_step, cosine_lr, grad_check, Activation, AdamState, GradCheckOptions, Mlp, MlpGrads};
use crate::reliability::{
    dro_fuse, fuse_and_normalize, kl_ball_oracle, score_delta, score_je, score_rep, ScoreTriple,
    WeightNorm, DEFAULT_ORACLE_RESOLUTION,
};
use crate::series::{
    downsample, instance_denormalize, instance_normalize, make_windows, patchify, split_frame, unpatchify, upsample,
    window_count, DatasetKind, Reduction, SeriesFrame,
};

/// Suites in the order `run_suites` executes them.
pub const SUITES: [&str; 7] = [
    "dro",
    "telescoping",
    "gradients",
    "clustering",
    "roundtrips",
    "scores",
    "forecaster",
];

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Test hook: shifts every `dro_fuse` value seen by the `dro` suite by `1e-3`.
    pub inject_fault: bool,
}

/// One property: `value` must not exceed `bound`. Boolean properties use
/// `value = number of violations` and `bound = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
        }
    }

    pub fn violations(name: impl Into<String>, count: usize) -> Self {
        Self::at_most(name, count as f64, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn suite_rng(opts: &VerifyOptions, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(salt);
    rng
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let checks = match name {
        "dro" => dro_suite(opts)?,
        "telescoping" => telescoping_suite(opts)?,
        "gradients" => gradient_suite(opts)?,
        "clustering" => clustering_suite(opts)?,
        "roundtrips" => roundtrip_suite(opts)?,
        "scores" => score_suite(opts)?,
        "forecaster" => forecaster_suite(opts)?,
        other => {
            return Err(RecastError::config(format!(
                "unknown suite {other:?} (expected one of {})",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        checks,
        elapsed: start.elapsed(),
    })
}

/// Runs `names` in order. Without `keep_going`, stops after the first failing suite.
pub fn run_suites(names: &[&str], opts: &VerifyOptions, keep_going: bool) -> Result<Vec<SuiteReport>> {
    let mut out = Vec::new();
    for name in names {
        let report = run_suite(name, opts)?;
        let failed = !report.passed();
        out.push(report);
        if failed && !keep_going {
            break;
        }
    }
    Ok(out)
}

/// Worst |dro_fuse − oracle| over `triples` random score vectors in `[0, 1]³` at `gamma`.
pub fn dro_oracle_gap(rng: &mut ChaCha8Rng, triples: usize, gamma: f64, resolution: usize, fault: bool) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let z = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let triple = ScoreTriple { rep: z[0], delta: z[1], je: z[2] };
        let mut fused = dro_fuse(&triple, gamma)?;
        if fault {
            fused += 1e-3;
        }
        let oracle = kl_ball_oracle(z, gamma, resolution)?;
        worst = worst.max((fused - oracle.value).abs());
    }
    Ok(worst)
}

fn dro_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 1);
    let mut checks = Vec::new();
    for gamma in [0.1, 1.0, 10.0] {
        let gap = dro_oracle_gap(&mut rng, 200, gamma, DEFAULT_ORACLE_RESOLUTION, opts.inject_fault)?;
        checks.push(Check::at_most(format!("oracle gap γ={gamma}"), gap, 1e-4));
    }
    let shift = if opts.inject_fault { 1e-3 } else { 0.0 };
    let (mut above_min, mut not_monotone) = (0, 0);
    let mut limit_gap = 0.0f64;
    for _ in 0..500 {
        let z: [f64; 3] = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let gamma = 10f64.powf(rng.random_range(-2.0..1.5));
        let triple = ScoreTriple { rep: z[0], delta: z[1], je: z[2] };
        let v = dro_fuse(&triple, gamma)? + shift;
        let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
        if v > min {
            above_min += 1;
        }
        let i = rng.random_range(0..3);
        let mut bumped = z;
        bumped[i] += rng.random_range(0.01..1.0);
        let b = ScoreTriple { rep: bumped[0], delta: bumped[1], je: bumped[2] };
        let bumped_value = dro_fuse(&b, gamma)? + shift;
        // The softmin weight of z_i; below ~1e-12 its effect on the value is not representable.
        let weight_i = (-(z[i] - min) / gamma).exp() / z.iter().map(|&zj| (-(zj - min) / gamma).exp()).sum::<f64>();
        if bumped_value < v || (weight_i >= 1e-12 && bumped_value <= v) {
            not_monotone += 1;
        }
        limit_gap = limit_gap.max((dro_fuse(&triple, 1e-3)? + shift - min).abs());
    }
    checks.push(Check::violations("softmin ≤ min", above_min));
    checks.push(Check::violations("strictly increasing in each score", not_monotone));
    checks.push(Check::at_most("γ=1e-3 limit gap", limit_gap, 5e-3));
    Ok(checks)
}

/// Max-abs deviation of the running codebook from `(1/t) Σ_j diag(Ŵ^j) Ŝ^j` over `epochs` random epochs.
pub fn telescoping_gap(rng: &mut ChaCha8Rng, epochs: usize, k: usize, dim: usize) -> Result<f64> {
    let mut pseudo = Vec::new();
    let mut weights = Vec::new();
    let first = PseudoCodebook {
        centers: random_matrix(rng, k, dim, 2.0),
        epoch: 1,
    };
    let mut book = init_codebook(&first)?;
    pseudo.push(first.centers.clone());
    weights.push(Array1::<f64>::ones(k));
    let mut worst = 0.0f64;
    for t in 2..=epochs {
        let p = PseudoCodebook {
            centers: random_matrix(rng, k, dim, 2.0),
            epoch: t,
        };
        let w = Array1::from_shape_fn(k, |_| rng.random_range(0.1..3.0));
        book = incremental_update(&book, &p, w.view())?;
        pseudo.push(p.centers);
        weights.push(w);
        let mut direct = Array2::<f64>::zeros((k, dim));
        for (s, w) in pseudo.iter().zip(&weights) {
            for r in 0..k {
                for c in 0..dim {
                    direct[[r, c]] += w[r] * s[[r, c]];
                }
            }
        }
        direct /= t as f64;
        let gap = (&book.codewords - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(gap);
    }
    Ok(worst)
}

fn telescoping_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        worst = worst.max(telescoping_gap(&mut rng, 10, 8, 8)?);
    }
    Ok(vec![Check::at_most("telescoping max-abs", worst, 1e-10)])
}

fn squared_error_loss(mlp: &Mlp<f64>, x: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, MlpGrads<f64>)> {
    let (y, cache) = mlp.forward(x.view())?;
    let diff = &y - target;
    let loss = 0.5 * diff.mapv(|v| v * v).sum();
    Ok((loss, mlp.backward(&cache, diff.view())?))
}

/// Worst relative gradient error of a forecaster's two MLPs under the
/// training loss, for one random configuration with every width ≤ `max_dim`.
pub fn forecaster_gradient_error(rng: &mut ChaCha8Rng, max_dim: usize, activation: Activation) -> Result<(f64, f64)> {
    let patch_len = [4, 8][rng.random_range(0..2)];
    let lookback = patch_len * rng.random_range(1..=max_dim / patch_len);
    let horizon = rng.random_range(1..=max_dim);
    let k = rng.random_range(2..=6);
    let dims = ModelDims::new(lookback, horizon, patch_len, k, Reduction::Halve, 1e-5)?;
    let quant_hidden = rng.random_range(2..=max_dim);
    let res_hidden = rng.random_range(2..=max_dim);
    let model = DualPathModel::<f64>::new(dims, quant_hidden, res_hidden, activation, rng)?;
    let codebook = Codebook::new(random_matrix(rng, k, dims.codeword_dim, 1.0), 1)?;
    let channels = rng.random_range(1..=3);
    let windows: Vec<_> = (0..2)
        .map(|_| prepare_window(random_matrix(rng, channels, lookback, 2.0).view(), &dims))
        .collect::<Result<_>>()?;
    let targets: Vec<Array2<f64>> = (0..2).map(|_| random_matrix(rng, channels, horizon, 2.0)).collect();
    let refs: Vec<_> = windows.iter().collect();
    let views: Vec<_> = targets.iter().map(|t| t.view()).collect();
    let opts = GradCheckOptions::default();

    // Quantization path: the continuous head is the straight-through surrogate
    // whose gradient the snapped forward uses.
    let quant = grad_check(
        &model.quant_mlp,
        |mlp: &Mlp<f64>| {
            let mut m = model.clone();
            m.quant_mlp = mlp.clone();
            let fwd = forward_batch(&m, &codebook, &refs, QuantHead::Continuous)?;
            let (loss, grads) = training_loss(&m, &codebook, &fwd, &views, 0.0, 0.0, 0.0)?;
            Ok((loss.total, grads.quant))
        },
        opts,
    )?;
    let res = grad_check(
        &model.res_mlp,
        |mlp: &Mlp<f64>| {
            let mut m = model.clone();
            m.res_mlp = mlp.clone();
            let fwd = forward_batch(&m, &codebook, &refs, QuantHead::Snap)?;
            let (loss, grads) = training_loss(&m, &codebook, &fwd, &views, 0.0, 0.0, 0.0)?;
            let g = grads.res.ok_or_else(|| RecastError::Internal("residual gradient missing".into()))?;
            Ok((loss.total, g))
        },
        opts,
    )?;
    Ok((quant.max_rel_error, res.max_rel_error))
}

fn gradient_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 3);
    let mut net_worst = 0.0f64;
    for i in 0..40 {
        let depth = 1 + i % 2;
        let mut dims = vec![rng.random_range(1..=16)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=16));
        }
        let act = if i % 4 < 2 { Activation::Relu } else { Activation::Gelu };
        let mlp = Mlp::new(&dims, act, &mut rng)?;
        let x = random_matrix(&mut rng, 4, dims[0], 1.0);
        let t = random_matrix(&mut rng, 4, *dims.last().unwrap_or(&1), 1.0);
        let report = grad_check(&mlp, |m: &Mlp<f64>| squared_error_loss(m, &x, &t), GradCheckOptions::default())?;
        net_worst = net_worst.max(report.max_rel_error);
    }
    let (mut quant_worst, mut res_worst) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let act = if i % 2 == 0 { Activation::Relu } else { Activation::Gelu };
        let (q, r) = forecaster_gradient_error(&mut rng, 32, act)?;
        quant_worst = quant_worst.max(q);
        res_worst = res_worst.max(r);
    }

    let mlp = Mlp::<f64>::new(&[6, 5, 3], Activation::Relu, &mut suite_rng(opts, 30))?;
    let x = random_matrix(&mut rng, 4, 6, 1.0);
    let t = random_matrix(&mut rng, 4, 3, 1.0);
    let trajectory = |mut m: Mlp<f64>| -> Result<Mlp<f64>> {
        let mut state = AdamState::new(&m);
        for _ in 0..25 {
            let (_, g) = squared_error_loss(&m, &x, &t)?;
            adam_step(&mut m, &g, &mut state, 1e-2)?;
        }
        Ok(m)
    };
    let adam_diverged = usize::from(trajectory(mlp.clone())? != trajectory(mlp)?);

    let mut schedule_bad = 0;
    for total in [1, 2, 7, 30, 100] {
        let lrs: Vec<f64> = (0..total).map(|e| cosine_lr(3e-4, e, total)).collect::<Result<_>>()?;
        if lrs[0] != 3e-4 || lrs.windows(2).any(|w| w[1] > w[0]) || lrs[total - 1] <= 0.0 {
            schedule_bad += 1;
        }
    }
    Ok(vec![
        Check::at_most("dense nets rel error", net_worst, 1e-4),
        Check::at_most("quantization MLP rel error", quant_worst, 1e-4),
        Check::at_most("residual MLP rel error", res_worst, 1e-4),
        Check::violations("adam replay differs", adam_diverged),
        Check::violations("cosine schedule shape", schedule_bad),
    ])
}

/// Energy increases and center-update mismatches over `instances` random Lloyd runs.
pub fn clustering_violations(rng: &mut ChaCha8Rng, instances: usize) -> Result<(usize, usize, usize)> {
    let (mut rising, mut not_mean, mut energy_bad) = (0, 0, 0);
    for _ in 0..instances {
        let n = rng.random_range(10..80);
        let dim = rng.random_range(1..9);
        let k = rng.random_range(1..=8.min(n));
        let patches = random_matrix(rng, n, dim, 1.0);
        let init = kmeans_plus_plus(patches.view(), k, rng)?;
        let result = lloyd_cluster(patches.view(), k, init.view(), 50, 1)?;
        if result.energy_trace.windows(2).any(|w| w[1] > w[0]) {
            rising += 1;
        }
        let labels = assign_labels(patches.view(), init.view());
        let (centers, counts) = update_centers(patches.view(), &labels, init.view());
        let indicator: Array2<f64> = crate::codebook::Assignment::from_labels(labels.clone(), k).indicator();
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            // (MᵀM)⁻¹ Mᵀ P restricted to row c, accumulated in patch order.
            let mut mtm = 0.0;
            let mut mtp = Array1::<f64>::zeros(dim);
            for i in 0..n {
                mtm += indicator[[i, c]] * indicator[[i, c]];
                for d in 0..dim {
                    mtp[d] += indicator[[i, c]] * patches[[i, d]];
                }
            }
            if centers.row(c) != mtp.mapv(|v| v / mtm) {
                not_mean += 1;
            }
        }
        let mut direct = 0.0;
        for (i, &l) in result.assignment.labels.iter().enumerate() {
            for d in 0..dim {
                let diff = patches[[i, d]] - result.pseudo.centers[[l, d]];
                direct += diff * diff;
            }
        }
        let reported = clustering_energy(patches.view(), &result.assignment.labels, result.pseudo.centers.view());
        if (reported - direct).abs() > 1e-9 * direct.max(1.0) {
            energy_bad += 1;
        }
    }
    Ok((rising, not_mean, energy_bad))
}

fn clustering_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 4);
    let (rising, not_mean, energy_bad) = clustering_violations(&mut rng, 100)?;

    let mut not_idempotent = 0;
    for _ in 0..50 {
        let k = rng.random_range(1..6);
        let codebook = Codebook::new(random_matrix(&mut rng, k, 4, 1.0), 1)?;
        let x = random_matrix(&mut rng, 2, 24, 1.0);
        let reduced = patchify(x.view(), 8)?.reduced(Reduction::Halve)?;
        let q = quantize(reduced.view(), 2, &codebook)?;
        let rec = reconstruct(&q, &codebook, 24, Reduction::Halve)?;
        let again = quantize(patchify(rec.view(), 8)?.reduced(Reduction::Halve)?.view(), 2, &codebook)?;
        if again != q {
            not_idempotent += 1;
        }
    }

    let mut sep_not_decreasing = 0;
    for _ in 0..50 {
        let dim = rng.random_range(1..8);
        let mut centers = random_matrix(&mut rng, 2, dim, 1.0);
        let row = centers.row(0).to_owned();
        centers.row_mut(1).assign(&row);
        let tau = centers.mapv(|v| v * v).sum();
        let frozen = |c: &Array2<f64>| {
            let mut total = 0.0;
            for i in 0..c.nrows() {
                for j in 0..c.nrows() {
                    let d: f64 = (&c.row(i) - &c.row(j)).mapv(|v| v * v).sum();
                    total += (-d / tau).exp();
                }
            }
            total.ln()
        };
        let before = frozen(&centers);
        let dir = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
        let mut apart = centers.clone();
        apart.row_mut(0).scaled_add(-0.05, &dir);
        apart.row_mut(1).scaled_add(0.05, &dir);
        if frozen(&apart) >= before || (separation_loss(centers.view()) - before).abs() > 1e-12 {
            sep_not_decreasing += 1;
        }
        let (_, grad) = separation_gradient(centers.view());
        if !grad.iter().all(|v| v.is_finite()) {
            sep_not_decreasing += 1;
        }
    }
    Ok(vec![
        Check::violations("energy trace non-increasing", rising),
        Check::violations("center update equals cluster mean", not_mean),
        Check::violations("energy matches direct loop", energy_bad),
        Check::violations("quantization idempotent", not_idempotent),
        Check::violations("separation drops when coincident centers part", sep_not_decreasing),
    ])
}

/// `(normalization max error, patch mismatches, down∘up mismatches)` over `cases` random inputs.
pub fn roundtrip_errors(rng: &mut ChaCha8Rng, cases: usize) -> Result<(f64, usize, usize)> {
    let (mut norm_err, mut patch_bad, mut pool_bad) = (0.0f64, 0, 0);
    for _ in 0..cases {
        let c = rng.random_range(1..5);
        let len = rng.random_range(1..200);
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let offset = rng.random_range(-100.0..100.0);
        let x = random_matrix(rng, c, len, scale).mapv(|v| v + offset);
        let (xn, stats) = instance_normalize(x.view(), 1e-5);
        let back = instance_denormalize(xn.view(), &stats)?;
        norm_err = norm_err.max((&back - &x).iter().fold(0.0f64, |m, v| m.max(v.abs())));

        let patch_len = 2 * rng.random_range(1..13);
        let set = patchify(x.view(), patch_len)?;
        if unpatchify(&set) != x {
            patch_bad += 1;
        }
        let v = Array1::from_shape_fn(rng.random_range(1..40), |_| rng.random_range(-scale..scale));
        if downsample(upsample(v.view()).view())? != v {
            pool_bad += 1;
        }
    }
    Ok((norm_err, patch_bad, pool_bad))
}

fn roundtrip_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 5);
    let (norm_err, patch_bad, pool_bad) = roundtrip_errors(&mut rng, 100)?;

    let (mut split_bad, mut count_bad) = (0, 0);
    for _ in 0..50 {
        let len = rng.random_range(50..400);
        let frame = SeriesFrame::from_values(Array2::from_shape_fn((1, len), |(_, t)| t as f64))?;
        let kind = if rng.random::<bool>() { DatasetKind::Ett } else { DatasetKind::Other };
        if let Ok((tr, va, te)) = split_frame(&frame, kind, 5) {
            let (tr_max, va_min, te_min) = (tr.values[[0, tr.len() - 1]], va.values[[0, 0]], te.values[[0, 0]]);
            if !(tr_max < va_min && va_min < te_min) || tr.len() + va.len() + te.len() != len {
                split_bad += 1;
            }
        }
        let (l, h, stride) = (rng.random_range(1..40), rng.random_range(1..40), rng.random_range(1..6));
        let expected = if len >= l + h { (len - l - h) / stride + 1 } else { 0 };
        if window_count(len, l, h, stride) != expected || make_windows(&frame, l, h, stride).len() != expected {
            count_bad += 1;
        }
    }
    Ok(vec![
        Check::at_most("normalization roundtrip max error", norm_err, 1e-6),
        Check::violations("patch roundtrip exact", patch_bad),
        Check::violations("downsample∘upsample exact", pool_bad),
        Check::violations("splits chronological", split_bad),
        Check::violations("window count formula", count_bad),
    ])
}

/// Bound violations, the worst log-domain vs direct mismatch and the number of
/// codewords compared directly, over `instances` random clusterings.
pub fn score_property_check(rng: &mut ChaCha8Rng, instances: usize) -> Result<(usize, f64, usize)> {
    // Beyond this gap, exp(−gap) vanishes next to 1 in f64 and `1 − exp(−gap)` rounds to 1.
    const REPRESENTABLE_GAP: f64 = 36.0;
    let (mut bound_bad, mut worst, mut compared) = (0usize, 0.0f64, 0usize);
    for i in 0..instances {
        let n = rng.random_range(8..60);
        let dim = rng.random_range(1..9);
        let k = rng.random_range(1..=6.min(n));
        let scale = if i % 4 == 3 { 20.0 } else { 0.4 };
        let patches = random_matrix(rng, n, dim, scale);
        let init = kmeans_plus_plus(patches.view(), k, rng)?;
        let result = lloyd_cluster(patches.view(), k, init.view(), 50, 2)?;
        let centers = result.pseudo.centers.view();
        let previous = &centers + &random_matrix(rng, k, dim, scale * 0.5);
        let rep = score_rep(patches.view(), centers, &result.assignment)?;
        let delta = score_delta(centers, previous.view())?;
        let je = score_je(patches.view(), centers)?;

        let mut e = vec![0.0; k];
        for (p, &l) in patches.outer_iter().zip(&result.assignment.labels) {
            e[l] += (&p - &centers.row(l)).mapv(|v| v * v).sum();
        }
        let d: Vec<f64> = (0..k).map(|c| (&centers.row(c) - &previous.row(c)).mapv(|v| v * v).sum()).collect();
        let a: Vec<f64> = (0..k)
            .map(|c| patches.outer_iter().map(|p| (&p - &centers.row(c)).mapv(f64::abs).sum()).sum())
            .collect();
        let (et, dt, at): (f64, f64, f64) = (e.iter().sum(), d.iter().sum(), a.iter().sum());

        for c in 0..k {
            let upper_strict = |gap: f64, v: f64| if gap < REPRESENTABLE_GAP { v < 1.0 } else { v <= 1.0 };
            let ok = rep[c].is_finite()
                && delta[c].is_finite()
                && je[c].is_finite()
                && rep[c] >= 0.0
                && upper_strict(et - e[c], rep[c])
                && je[c] >= 0.0
                && upper_strict(at - a[c], je[c])
                && delta[c] <= 1.0
                && (delta[c] > 0.0 || dt - d[c] > 745.0);
            if !ok {
                bound_bad += 1;
            }
            // Direct forms, only where every exponential stays finite.
            if et < 700.0 && dt < 700.0 && at < 700.0 {
                let direct = [
                    1.0 - e[c].exp() / et.exp(),
                    d[c].exp() / dt.exp(),
                    1.0 - a[c].exp() / at.exp(),
                ];
                for (x, y) in [rep[c], delta[c], je[c]].iter().zip(direct) {
                    worst = worst.max((x - y).abs());
                }
                compared += 1;
            }
        }
    }
    Ok((bound_bad, worst, compared))
}

fn score_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 6);
    let (bound_bad, worst, compared) = score_property_check(&mut rng, 100)?;

    let (mut weight_bad, mut perm_bad) = (0, 0);
    for _ in 0..100 {
        let k = rng.random_range(1..12);
        let scores: Vec<ScoreTriple<f64>> = (0..k)
            .map(|_| ScoreTriple {
                rep: rng.random(),
                delta: rng.random(),
                je: rng.random(),
            })
            .collect();
        let gamma = rng.random_range(0.05..5.0);
        let w = fuse_and_normalize(&scores, gamma, WeightNorm::MeanOne)?.normalized;
        if w.iter().any(|&v| !(v > 0.0)) || (w.mean().unwrap_or(0.0) - 1.0).abs() > 1e-9 {
            weight_bad += 1;
        }
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<_> = perm.iter().map(|&i| scores[i]).collect();
        let wp = fuse_and_normalize(&permuted, gamma, WeightNorm::MeanOne)?.normalized;
        if perm.iter().enumerate().any(|(j, &i)| (wp[j] - w[i]).abs() > 1e-12) {
            perm_bad += 1;
        }
    }
    Ok(vec![
        Check::violations("score ranges", bound_bad),
        Check::at_most("log-domain vs direct max error", worst, 1e-9),
        Check::violations("no codeword compared against the direct form", usize::from(compared == 0)),
        Check::violations("normalized weights positive with mean 1", weight_bad),
        Check::violations("weights permutation-equivariant", perm_bad),
    ])
}

fn forecaster_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = suite_rng(opts, 7);
    let (mut shape_bad, mut additivity_bad, mut equivariance_bad, mut span_bad, mut st_bad) = (0, 0, 0, 0, 0);
    for _ in 0..30 {
        let patch_len = [4, 8, 16][rng.random_range(0..3)];
        let lookback = rng.random_range(patch_len..=64);
        let horizon = rng.random_range(1..=64);
        let k = rng.random_range(1..=8);
        let dims = ModelDims::new(lookback, horizon, patch_len, k, Reduction::Halve, 1e-5)?;
        let model = DualPathModel::<f64>::new(dims, 8, 16, Activation::Relu, &mut rng)?;
        let codebook = Codebook::new(random_matrix(&mut rng, k, dims.codeword_dim, 1.0), 1)?;
        let c = rng.random_range(1..=4);
        let x = random_matrix(&mut rng, c, lookback, 3.0);
        let out = forward(&model, &codebook, x.view())?;
        if out.y_hat.dim() != (c, horizon) || out.q_y.indices.dim() != (c, horizon.div_ceil(patch_len)) {
            shape_bad += 1;
        }
        for ch in 0..c {
            for h in 0..horizon {
                let (m, sd) = (out.stats.mean[ch], out.stats.std[ch]);
                if out.y_hat[[ch, h]] != sd * (out.y_q[[ch, h]] + out.y_r[[ch, h]]) + m {
                    additivity_bad += 1;
                }
            }
        }
        let ups: Vec<Array1<f64>> = codebook.codewords.outer_iter().map(upsample).collect();
        for ch in 0..c {
            for j in 0..dims.patches_out {
                let end = ((j + 1) * patch_len).min(horizon);
                let seg = out.y_q.slice(s![ch, j * patch_len..end]);
                if !ups.iter().any(|u| u.slice(s![..end - j * patch_len]) == seg) {
                    span_bad += 1;
                }
            }
        }
        let mut perm: Vec<usize> = (0..c).collect();
        perm.reverse();
        let xp = Array2::from_shape_fn((c, lookback), |(i, t)| x[[perm[i], t]]);
        let outp = forward(&model, &codebook, xp.view())?;
        if (0..c).any(|i| outp.y_hat.row(i) != out.y_hat.row(perm[i])) {
            equivariance_bad += 1;
        }
        let embedded = random_matrix(&mut rng, c, dims.quant_in(), 1.0);
        let upstream = random_matrix(&mut rng, c, horizon, 1.0);
        let snap = quant_path_forward(&model, &codebook, embedded.view(), QuantHead::Snap)?;
        let cont = quant_path_forward(&model, &codebook, embedded.view(), QuantHead::Continuous)?;
        if quant_path_backward(&model, &snap, upstream.view())? != quant_path_backward(&model, &cont, upstream.view())? {
            st_bad += 1;
        }
    }

    // Lookback built from upsampled codewords of its own normalized values.
    let mut perfect_bad = 0;
    for _ in 0..20 {
        let dims = ModelDims::new(32, 16, 8, 4, Reduction::Halve, 1e-5)?;
        let model = DualPathModel::<f64>::new(dims, 8, 16, Activation::Relu, &mut rng)?;
        let half = random_matrix(&mut rng, 2, 16, 2.0);
        let x = Array2::from_shape_fn((2, 32), |(c, t)| half[[c, t / 2]]);
        let (xn, _) = instance_normalize(x.view(), 1e-5);
        let reduced = patchify(xn.view(), 8)?.reduced(Reduction::Halve)?;
        let codebook = Codebook::new(reduced.slice(s![..4, ..]).to_owned(), 1)?;
        let rows = reduced.nrows();
        let extra = Codebook::new(
            ndarray::concatenate![ndarray::Axis(0), codebook.codewords, reduced.slice(s![4..rows, ..])],
            1,
        )?;
        let model8 = DualPathModel::<f64> {
            dims: ModelDims::new(32, 16, 8, extra.k(), Reduction::Halve, 1e-5)?,
            ..model
        };
        let out = forward(&model8, &extra, x.view())?;
        if out.x_r.iter().any(|&v| v != 0.0) {
            perfect_bad += 1;
        }
    }

    let mut tag_bad = 0;
    {
        let dims = ModelDims::new(16, 8, 8, 2, Reduction::Halve, 1e-5)?;
        let model = DualPathModel::<f64>::new(dims, 4, 4, Activation::Relu, &mut rng)?;
        let codebook = Codebook::new(random_matrix(&mut rng, 2, 4, 1.0), 3)?;
        let window = prepare_window(random_matrix(&mut rng, 1, 16, 1.0).view(), &dims)?;
        let fwd = forward_batch(&model, &codebook, &[&window], QuantHead::Snap)?;
        let later = Codebook::new(codebook.codewords.clone(), 4)?;
        let target = Array2::zeros((1, 8));
        if fwd.outputs[0].codebook_epoch != 3
            || training_loss(&model, &later, &fwd, &[target.view()], 0.0, 0.0, 0.0).is_ok()
        {
            tag_bad += 1;
        }
    }
    Ok(vec![
        Check::violations("output shapes", shape_bad),
        Check::violations("denormalized sum of paths", additivity_bad),
        Check::violations("channel permutation equivariance", equivariance_bad),
        Check::violations("quantized forecast in codeword span", span_bad),
        Check::violations("straight-through backward is identity", st_bad),
        Check::violations("perfect codebook leaves zero residual", perfect_bad),
        Check::violations("codebook epoch tag enforced", tag_bad),
    ])
}
