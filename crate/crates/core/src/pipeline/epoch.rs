use ndarray::{Array1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{Ablation, TrainConfig};
use super::data::{sample_patches, stream_rng, PreparedSplit, RngPurpose};
use super::metrics::evaluate_prepared;
use crate::codebook::{
    alignment_warm_start, incremental_update, init_codebook, lloyd_cluster, separation_loss, separation_step, Codebook,
};
use crate::error::{RecastError, Result};
use crate::forecaster::{forward_batch, training_loss, DualPathModel, QuantHead};
use crate::nn::{adam_step, cosine_lr, AdamState};
use crate::reliability::{fuse_with, score_delta, score_je, score_rep, score_triples, FusionRule};
use crate::scalar::Scalar;

/// Model, codebook and optimizer state between epochs.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub model: DualPathModel<T>,
    /// `None` before the first epoch.
    pub codebook: Option<Codebook<T>>,
    pub adam_quant: AdamState<T>,
    pub adam_res: AdamState<T>,
    /// Number of completed epochs.
    pub epoch: usize,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, 0, RngPurpose::ModelInit);
        let mut model = DualPathModel::new(
            config.model_dims()?,
            config.quant_hidden,
            config.res_hidden,
            config.activation,
            &mut rng,
        )?;
        model.residual_enabled = !config.has(Ablation::NoResidual);
        Ok(Self {
            adam_quant: AdamState::new(&model.quant_mlp),
            adam_res: AdamState::new(&model.res_mlp),
            model,
            codebook: None,
            epoch: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl WeightStats {
    fn of<T: Scalar>(w: &Array1<T>) -> Self {
        let v: Vec<f64> = w.iter().map(|x| x.as_f64()).collect();
        Self {
            min: v.iter().cloned().fold(f64::INFINITY, f64::min),
            max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// One completed epoch. Contains no timings so that replays serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub lr: f64,
    /// Mean total loss over the epoch's minibatches.
    pub train_loss: f64,
    /// Mean L1 forecast term over the epoch's minibatches.
    pub train_l1: f64,
    pub valid_mse: Option<f64>,
    pub valid_mae: Option<f64>,
    pub sampled_patches: usize,
    pub lloyd_iters: usize,
    pub lloyd_converged: bool,
    /// `‖S^t − S^{t−1}‖_F`; absent in the first epoch.
    pub codebook_shift: Option<f64>,
    /// Update weights `Ŵ^t`; absent when no update ran.
    pub weight_stats: Option<WeightStats>,
    pub sep_loss: f64,
    pub codebook_epoch: usize,
    pub ablations: Vec<Ablation>,
}

fn frobenius_shift<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).as_f64().powi(2))
        .sum::<f64>()
        .sqrt()
}

struct CodebookStep<T> {
    codebook: Codebook<T>,
    sampled: usize,
    lloyd_iters: usize,
    converged: bool,
    weights: Option<WeightStats>,
}

/// Sample → cluster → (score → fuse → merge) for epoch `t`.
fn codebook_step<T: Scalar>(
    previous: Option<&Codebook<T>>,
    pool: ArrayView2<'_, T>,
    config: &TrainConfig,
    t: usize,
    lr: T,
) -> Result<CodebookStep<T>> {
    if let (Some(prev), true) = (previous, config.has(Ablation::NoUpdating)) {
        return Ok(CodebookStep {
            codebook: prev.clone(),
            sampled: 0,
            lloyd_iters: 0,
            converged: true,
            weights: None,
        });
    }
    let sample = if config.has(Ablation::NoRandom) {
        pool.to_owned()
    } else {
        sample_patches(pool, config.sample_ratio, config.seed, t)?
    };
    let k = config.codebook_size;
    let mut rng = stream_rng(config.seed, t, RngPurpose::ClusterInit);
    let init = alignment_warm_start(previous, sample.view(), k, &mut rng)?;
    let mut cluster = lloyd_cluster(sample.view(), k, init.view(), config.lloyd_max_iters, t)?;
    let sep_rate = T::lit(config.w_sep) * lr;
    for _ in 0..config.sep_steps {
        separation_step(&mut cluster.pseudo.centers, sep_rate);
    }
    if !cluster.pseudo.centers.iter().all(|v| v.is_finite()) {
        return Err(RecastError::NonFinite("pseudo codebook"));
    }

    let (codebook, weights) = match previous {
        None => (init_codebook(&cluster.pseudo)?, None),
        Some(prev) => {
            let weights = if config.has(Ablation::NoScoring) {
                Array1::ones(k)
            } else {
                let centers = cluster.pseudo.centers.view();
                let rep = score_rep(sample.view(), centers, &cluster.assignment)?;
                let delta = score_delta(centers, prev.codewords.view())?;
                let je = score_je(sample.view(), centers)?;
                let rule = if config.has(Ablation::NoDro) {
                    FusionRule::Mean
                } else {
                    FusionRule::Dro { gamma: T::lit(config.gamma) }
                };
                fuse_with(&score_triples(&rep, &delta, &je), rule, config.weight_norm)?.normalized
            };
            let stats = WeightStats::of(&weights);
            (incremental_update(prev, &cluster.pseudo, weights.view())?, Some(stats))
        }
    };
    Ok(CodebookStep {
        codebook,
        sampled: sample.nrows(),
        lloyd_iters: cluster.iterations,
        converged: cluster.converged,
        weights,
    })
}

/// Runs epoch `state.epoch + 1`: codebook construction first, then one pass of
/// minibatch gradient steps against that frozen codebook, then validation.
pub fn run_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    train: &PreparedSplit<T>,
    valid: Option<&PreparedSplit<T>>,
    config: &TrainConfig,
) -> Result<EpochReport> {
    if train.is_empty() {
        return Err(RecastError::data("no training windows"));
    }
    if state.epoch >= config.epochs {
        return Err(RecastError::config(format!(
            "all {} configured epochs have already run",
            config.epochs
        )));
    }
    let t = state.epoch + 1;
    let lr = cosine_lr(T::lit(config.lr), t - 1, config.epochs)?;

    let pool = train.patch_pool()?;
    let step = codebook_step(state.codebook.as_ref(), pool.view(), config, t, lr)?;
    let codebook = step.codebook;
    let shift = state
        .codebook
        .as_ref()
        .map(|prev| frobenius_shift(codebook.codewords.view(), prev.codewords.view()));
    let sep = separation_loss(codebook.codewords.view());

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut stream_rng(config.seed, t, RngPurpose::Shuffle));
    if config.sample_training {
        let keep = ((order.len() as f64 * config.sample_ratio).floor() as usize).max(1);
        order.truncate(keep);
    }

    let (mut loss_sum, mut l1_sum, mut seen) = (0.0, 0.0, 0usize);
    for batch in order.chunks(config.batch_size) {
        let windows: Vec<_> = batch.iter().map(|&i| &train.windows[i]).collect();
        let targets: Vec<_> = batch.iter().map(|&i| train.targets[i].view()).collect();
        let fwd = forward_batch(&state.model, &codebook, &windows, QuantHead::Snap)?;
        let (loss, grads) = training_loss(
            &state.model,
            &codebook,
            &fwd,
            &targets,
            sep,
            T::lit(config.w_sep),
            T::lit(config.aux_weight),
        )?;
        if !loss.total.is_finite() || !grads.is_finite() {
            return Err(RecastError::Data(format!(
                "non-finite training loss {} at epoch {t} (batch starting at window {})",
                loss.total.as_f64(),
                batch[0]
            )));
        }
        adam_step(&mut state.model.quant_mlp, &grads.quant, &mut state.adam_quant, lr)?;
        if let Some(res) = &grads.res {
            adam_step(&mut state.model.res_mlp, res, &mut state.adam_res, lr)?;
        }
        loss_sum += loss.total.as_f64() * batch.len() as f64;
        l1_sum += loss.forecast.as_f64() * batch.len() as f64;
        seen += batch.len();
    }

    let metrics = match valid {
        Some(v) => Some(evaluate_prepared(&state.model, &codebook, v)?),
        None => None,
    };
    let report = EpochReport {
        epoch: t,
        lr: lr.as_f64(),
        train_loss: loss_sum / seen as f64,
        train_l1: l1_sum / seen as f64,
        valid_mse: metrics.map(|m| m.mse),
        valid_mae: metrics.map(|m| m.mae),
        sampled_patches: step.sampled,
        lloyd_iters: step.lloyd_iters,
        lloyd_converged: step.converged,
        codebook_shift: shift,
        weight_stats: step.weights,
        sep_loss: sep.as_f64(),
        codebook_epoch: codebook.epoch,
        ablations: config.ablations.iter().copied().collect(),
    };
    state.codebook = Some(codebook);
    state.epoch = t;
    Ok(report)
}
