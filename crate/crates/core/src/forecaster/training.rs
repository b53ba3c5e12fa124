use ndarray::{s, Array2, ArrayView2};

use super::model::DualPathModel;
use super::paths::{embed_indices, BatchForward};
use crate::codebook::{quantize, Codebook};
use crate::error::{RecastError, Result};
use crate::nn::{l1_loss, MlpGrads};
use crate::scalar::{sign0, Scalar};
use crate::series::reduced_patches;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    /// Mean absolute error in the original scale.
    pub forecast: T,
    /// `L_sep` of the current codebook, constant with respect to the MLPs.
    pub separation: T,
    /// Weighted auxiliary codeword regression term (zero when disabled).
    pub aux: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualGrads<T> {
    pub quant: MlpGrads<T>,
    /// `None` when the residual path is disabled.
    pub res: Option<MlpGrads<T>>,
}

impl<T: Scalar> DualGrads<T> {
    pub fn is_finite(&self) -> bool {
        self.quant.is_finite() && self.res.as_ref().is_none_or(|g| g.is_finite())
    }
}

/// Embedded codewords of each target's future patches, normalized with the
/// lookback statistics. Rows line up with the batch's MLP rows.
fn aux_targets<T: Scalar>(
    model: &DualPathModel<T>,
    codebook: &Codebook<T>,
    fwd: &BatchForward<T>,
    targets: &[ArrayView2<'_, T>],
) -> Result<Array2<T>> {
    let dims = &model.dims;
    let mut out = Array2::zeros(fwd.quant.raw.dim());
    for ((o, y), &off) in fwd.outputs.iter().zip(targets).zip(&fwd.row_offsets) {
        let mut y_norm = y.to_owned();
        for (c, mut row) in y_norm.outer_iter_mut().enumerate() {
            let (m, sd) = (o.stats.mean[c], o.stats.std[c]);
            row.mapv_inplace(|v| (v - m) / sd);
        }
        let reduced = reduced_patches(y_norm.view(), dims.patch_len, dims.reduction)?;
        let q = quantize(reduced.view(), y.nrows(), codebook)?;
        let emb = embed_indices(&q, codebook)?;
        out.slice_mut(s![off..off + y.nrows(), ..]).assign(&emb);
    }
    Ok(out)
}

/// `L = L1(Ŷ, Y) + w_sep·L_sep (+ aux_weight·L1(raw, future codewords))`.
///
/// The L1 term averages over every window, channel and horizon step of the
/// batch. Gradients cross the snap unchanged; the codebook gets none.
#[allow(clippy::too_many_arguments)]
pub fn training_loss<T: Scalar>(
    model: &DualPathModel<T>,
    codebook: &Codebook<T>,
    fwd: &BatchForward<T>,
    targets: &[ArrayView2<'_, T>],
    separation: T,
    w_sep: T,
    aux_weight: T,
) -> Result<(LossBreakdown<T>, DualGrads<T>)> {
    if targets.len() != fwd.outputs.len() {
        return Err(RecastError::Dimension {
            context: "loss targets",
            expected: fwd.outputs.len(),
            actual: targets.len(),
        });
    }
    if fwd.outputs.iter().any(|o| o.codebook_epoch != codebook.epoch) {
        return Err(RecastError::Epoch {
            expected: codebook.epoch,
            actual: fwd.outputs[0].codebook_epoch,
        });
    }
    let mut count = 0usize;
    for (o, y) in fwd.outputs.iter().zip(targets) {
        if o.y_hat.dim() != y.dim() {
            return Err(RecastError::Shape {
                context: "loss target",
                left: o.y_hat.shape().to_vec(),
                right: y.shape().to_vec(),
            });
        }
        count += y.len();
    }
    let n = T::from_usize_lossy(count);

    let rows = fwd.quant.y_q.nrows();
    let mut abs_sum = T::zero();
    let mut grad_sum = Array2::zeros((rows, model.dims.horizon));
    for ((o, y), &off) in fwd.outputs.iter().zip(targets).zip(&fwd.row_offsets) {
        for c in 0..y.nrows() {
            let sd = o.stats.std[c];
            for h in 0..y.ncols() {
                let diff = o.y_hat[[c, h]] - y[[c, h]];
                abs_sum += diff.abs();
                grad_sum[[off + c, h]] = sd * sign0(diff) / n;
            }
        }
    }
    let forecast = abs_sum / n;

    let mut grad_raw = super::paths::quant_path_backward(model, &fwd.quant, grad_sum.view())?;
    let mut aux = T::zero();
    if aux_weight != T::zero() {
        let target = aux_targets(model, codebook, fwd, targets)?;
        let (value, grad) = l1_loss(fwd.quant.raw.view(), target.view())?;
        aux = aux_weight * value;
        grad_raw.scaled_add(aux_weight, &grad);
    }
    let quant = model.quant_mlp.backward(&fwd.quant.cache, grad_raw.view())?;
    let res = match &fwd.res_cache {
        Some(cache) if model.residual_enabled => Some(model.res_mlp.backward(cache, grad_sum.view())?),
        _ => None,
    };
    let sep_term = w_sep * separation;
    Ok((
        LossBreakdown {
            total: forecast + sep_term + aux,
            forecast,
            separation,
            aux,
        },
        DualGrads { quant, res },
    ))
}
