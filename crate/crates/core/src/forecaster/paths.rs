use ndarray::{s, Array2, ArrayView2};

use super::model::{DualPathModel, ModelDims};
use crate::codebook::{nearest_codeword, quantize, reconstruct, Codebook, QuantizedSeries};
use crate::error::{RecastError, Result};
use crate::nn::MlpCache;
use crate::scalar::Scalar;
use crate::series::{instance_normalize, reduced_patches, NormStats};

/// Normalized lookback window with its reduced patches, computed once and
/// reused across epochs since neither depends on the codebook.
#[derive(Debug, Clone)]
pub struct PreparedWindow<T> {
    pub x_norm: Array2<T>,
    pub stats: NormStats<T>,
    /// `(C·N) × d` reduced patches in channel-major order.
    pub reduced: Array2<T>,
}

impl<T> PreparedWindow<T> {
    pub fn channels(&self) -> usize {
        self.x_norm.nrows()
    }
}

pub fn prepare_window<T: Scalar>(x: ArrayView2<'_, T>, dims: &ModelDims) -> Result<PreparedWindow<T>> {
    if x.ncols() != dims.lookback {
        return Err(RecastError::Dimension {
            context: "lookback width",
            expected: dims.lookback,
            actual: x.ncols(),
        });
    }
    let (x_norm, stats) = instance_normalize(x, T::lit(dims.norm_eps));
    let reduced = reduced_patches(x_norm.view(), dims.patch_len, dims.reduction)?;
    Ok(PreparedWindow { x_norm, stats, reduced })
}

/// Concatenates the codewords selected by each channel's indices: `C × (N·d)`.
pub fn embed_indices<T: Scalar>(q: &QuantizedSeries, codebook: &Codebook<T>) -> Result<Array2<T>> {
    if q.codebook_epoch != codebook.epoch {
        return Err(RecastError::Epoch {
            expected: codebook.epoch,
            actual: q.codebook_epoch,
        });
    }
    let (channels, per_channel) = q.indices.dim();
    let d = codebook.dim();
    let mut out = Array2::zeros((channels, per_channel * d));
    for c in 0..channels {
        for j in 0..per_channel {
            let id = q.indices[[c, j]];
            if id >= codebook.k() {
                return Err(RecastError::IndexOutOfRange { index: id, k: codebook.k() });
            }
            out.slice_mut(s![c, j * d..(j + 1) * d]).assign(&codebook.codewords.row(id));
        }
    }
    Ok(out)
}

/// What the quantization head feeds into `Y_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantHead {
    /// Each output chunk is replaced by its nearest codeword.
    #[default]
    Snap,
    /// The continuous MLP output is expanded directly. Used to test that the
    /// snap's backward pass is the identity.
    Continuous,
}

#[derive(Debug, Clone)]
pub struct QuantPathOutput<T> {
    /// Continuous MLP output, `rows × (N_y·d)`.
    pub raw: Array2<T>,
    /// Nearest codeword of every output chunk, `rows × N_y`.
    pub q_y: Array2<usize>,
    /// Normalized-scale future signal, `rows × H`.
    pub y_q: Array2<T>,
    pub head: QuantHead,
    pub cache: MlpCache<T>,
}

fn check_codebook<T: Scalar>(dims: &ModelDims, codebook: &Codebook<T>) -> Result<()> {
    if codebook.dim() != dims.codeword_dim {
        return Err(RecastError::Dimension {
            context: "codeword dimension",
            expected: dims.codeword_dim,
            actual: codebook.dim(),
        });
    }
    Ok(())
}

fn codeword_span(dims: &ModelDims) -> usize {
    dims.patch_len
}

/// Runs `M_quant` on embedded rows and decodes each output chunk to a codeword.
pub fn quant_path_forward<T: Scalar>(
    model: &DualPathModel<T>,
    codebook: &Codebook<T>,
    embedded: ArrayView2<'_, T>,
    head: QuantHead,
) -> Result<QuantPathOutput<T>> {
    let dims = &model.dims;
    check_codebook(dims, codebook)?;
    if embedded.ncols() != dims.quant_in() {
        return Err(RecastError::Dimension {
            context: "quantization path input",
            expected: dims.quant_in(),
            actual: embedded.ncols(),
        });
    }
    let (raw, cache) = model.quant_mlp.forward(embedded)?;
    let rows = raw.nrows();
    let d = dims.codeword_dim;
    let span = codeword_span(dims);
    let mut q_y = Array2::zeros((rows, dims.patches_out));
    let mut y_q = Array2::zeros((rows, dims.horizon));
    for r in 0..rows {
        for j in 0..dims.patches_out {
            let chunk = raw.slice(s![r, j * d..(j + 1) * d]);
            let id = nearest_codeword(codebook.codewords.view(), chunk);
            q_y[[r, j]] = id;
            let piece = match head {
                QuantHead::Snap => dims.reduction.expand(codebook.codewords.row(id)),
                QuantHead::Continuous => dims.reduction.expand(chunk),
            };
            let end = ((j + 1) * span).min(dims.horizon);
            let start = j * span;
            y_q.slice_mut(s![r, start..end]).assign(&piece.slice(s![..end - start]));
        }
    }
    Ok(QuantPathOutput {
        raw,
        q_y,
        y_q,
        head,
        cache,
    })
}

/// Backpropagates `∂L/∂Y_q` into `M_quant`, treating the snap as identity.
pub fn quant_path_backward<T: Scalar>(
    model: &DualPathModel<T>,
    out: &QuantPathOutput<T>,
    grad_y_q: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    let dims = &model.dims;
    if grad_y_q.dim() != out.y_q.dim() {
        return Err(RecastError::Shape {
            context: "quantization path gradient",
            left: grad_y_q.shape().to_vec(),
            right: out.y_q.shape().to_vec(),
        });
    }
    let d = dims.codeword_dim;
    let span = codeword_span(dims);
    let mut grad_raw = Array2::zeros(out.raw.dim());
    let mut padded = ndarray::Array1::zeros(span);
    for r in 0..grad_y_q.nrows() {
        for j in 0..dims.patches_out {
            padded.fill(T::zero());
            let start = j * span;
            let end = ((j + 1) * span).min(dims.horizon);
            padded.slice_mut(s![..end - start]).assign(&grad_y_q.slice(s![r, start..end]));
            let g = dims.reduction.expand_adjoint(padded.view());
            grad_raw.slice_mut(s![r, j * d..(j + 1) * d]).assign(&g);
        }
    }
    Ok(grad_raw)
}

/// Runs `M_res` on residual rows of width `L`.
pub fn residual_path_forward<T: Scalar>(
    model: &DualPathModel<T>,
    x_r: ArrayView2<'_, T>,
) -> Result<(Array2<T>, MlpCache<T>)> {
    if x_r.ncols() != model.dims.lookback {
        return Err(RecastError::Dimension {
            context: "residual path input",
            expected: model.dims.lookback,
            actual: x_r.ncols(),
        });
    }
    model.res_mlp.forward(x_r)
}

/// Every intermediate of one window's forward pass.
#[derive(Debug, Clone)]
pub struct ForecastOutput<T> {
    /// Forecast in the original scale, `C × H`.
    pub y_hat: Array2<T>,
    /// Quantization-path forecast before denormalization, `C × H`.
    pub y_q: Array2<T>,
    /// Residual-path forecast before denormalization, `C × H`.
    pub y_r: Array2<T>,
    /// Future codeword indices, `C × N_y`.
    pub q_y: QuantizedSeries,
    /// Lookback codeword indices, `C × N`.
    pub q_x: QuantizedSeries,
    pub x_norm: Array2<T>,
    /// Codebook reconstruction of the lookback, `C × L`.
    pub x_q: Array2<T>,
    /// `x_norm − x_q`.
    pub x_r: Array2<T>,
    pub stats: NormStats<T>,
    pub codebook_epoch: usize,
}

/// Forward pass over a batch of windows stacked channel-major into MLP rows.
#[derive(Debug, Clone)]
pub struct BatchForward<T> {
    pub outputs: Vec<ForecastOutput<T>>,
    pub quant: QuantPathOutput<T>,
    pub res_cache: Option<MlpCache<T>>,
    /// First MLP row of each window.
    pub row_offsets: Vec<usize>,
}

pub fn forward_batch<T: Scalar>(
    model: &DualPathModel<T>,
    codebook: &Codebook<T>,
    windows: &[&PreparedWindow<T>],
    head: QuantHead,
) -> Result<BatchForward<T>> {
    let dims = &model.dims;
    check_codebook(dims, codebook)?;
    if windows.is_empty() {
        return Err(RecastError::data("empty forward batch"));
    }
    let mut row_offsets = Vec::with_capacity(windows.len());
    let mut rows = 0;
    for w in windows {
        if w.x_norm.ncols() != dims.lookback {
            return Err(RecastError::Dimension {
                context: "lookback width",
                expected: dims.lookback,
                actual: w.x_norm.ncols(),
            });
        }
        row_offsets.push(rows);
        rows += w.channels();
    }

    let mut embedded = Array2::zeros((rows, dims.quant_in()));
    let mut residual_in = Array2::zeros((rows, dims.lookback));
    let mut partial = Vec::with_capacity(windows.len());
    for (w, &off) in windows.iter().zip(&row_offsets) {
        let c = w.channels();
        let q_x = quantize(w.reduced.view(), c, codebook)?;
        let x_q = reconstruct(&q_x, codebook, dims.lookback, dims.reduction)?;
        let x_r = &w.x_norm - &x_q;
        embedded.slice_mut(s![off..off + c, ..]).assign(&embed_indices(&q_x, codebook)?);
        residual_in.slice_mut(s![off..off + c, ..]).assign(&x_r);
        partial.push((q_x, x_q, x_r));
    }

    let quant = quant_path_forward(model, codebook, embedded.view(), head)?;
    let (y_r_all, res_cache) = if model.residual_enabled {
        let (y, cache) = residual_path_forward(model, residual_in.view())?;
        (y, Some(cache))
    } else {
        (Array2::zeros((rows, dims.horizon)), None)
    };

    let mut outputs = Vec::with_capacity(windows.len());
    for ((w, &off), (q_x, x_q, x_r)) in windows.iter().zip(&row_offsets).zip(partial) {
        let c = w.channels();
        let y_q = quant.y_q.slice(s![off..off + c, ..]).to_owned();
        let y_r = y_r_all.slice(s![off..off + c, ..]).to_owned();
        let mut y_hat = &y_q + &y_r;
        for (ch, mut row) in y_hat.outer_iter_mut().enumerate() {
            let (m, sd) = (w.stats.mean[ch], w.stats.std[ch]);
            row.mapv_inplace(|v| sd * v + m);
        }
        outputs.push(ForecastOutput {
            y_hat,
            y_q,
            y_r,
            q_y: QuantizedSeries {
                indices: quant.q_y.slice(s![off..off + c, ..]).to_owned(),
                codebook_epoch: codebook.epoch,
            },
            q_x,
            x_norm: w.x_norm.clone(),
            x_q,
            x_r,
            stats: w.stats.clone(),
            codebook_epoch: codebook.epoch,
        });
    }
    Ok(BatchForward {
        outputs,
        quant,
        res_cache,
        row_offsets,
    })
}

/// Forecasts one `C × L` lookback window.
pub fn forward<T: Scalar>(model: &DualPathModel<T>, codebook: &Codebook<T>, x: ArrayView2<'_, T>) -> Result<ForecastOutput<T>> {
    let prepared = prepare_window(x, &model.dims)?;
    let mut batch = forward_batch(model, codebook, &[&prepared], QuantHead::Snap)?;
    Ok(batch.outputs.pop().expect("one window in, one output out"))
}
