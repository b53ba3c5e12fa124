use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;
use crate::series::Reduction;

/// The live codebook `S^t`: `K` codewords in reduced patch space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook<T> {
    /// `K × dim`
    pub codewords: Array2<T>,
    pub epoch: usize,
}

/// Cluster centers of one epoch, before they are merged into the codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCodebook<T> {
    pub centers: Array2<T>,
    pub epoch: usize,
}

/// Codeword ids of a window, `C × N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSeries {
    pub indices: Array2<usize>,
    pub codebook_epoch: usize,
}

impl<T: Scalar> Codebook<T> {
    pub fn new(codewords: Array2<T>, epoch: usize) -> Result<Self> {
        if codewords.nrows() == 0 || codewords.ncols() == 0 {
            return Err(RecastError::config("codebook needs at least one non-empty codeword"));
        }
        if codewords.iter().any(|v| !v.is_finite()) {
            return Err(RecastError::NonFinite("codewords"));
        }
        Ok(Self { codewords, epoch })
    }

    pub fn k(&self) -> usize {
        self.codewords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.codewords.ncols()
    }
}

impl<T: Scalar> PseudoCodebook<T> {
    pub fn k(&self) -> usize {
        self.centers.nrows()
    }
}

/// Index of the codeword closest to `v` in squared Euclidean distance; ties go to the lowest index.
pub fn nearest_codeword<T: Scalar>(codewords: ArrayView2<'_, T>, v: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    let mut best_dist = T::infinity();
    for (k, row) in codewords.outer_iter().enumerate() {
        let d = row.iter().zip(v.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        if d < best_dist {
            best_dist = d;
            best = k;
        }
    }
    best
}

/// Nearest-codeword id of every row of `rows`.
pub fn quantize_rows<T: Scalar>(rows: ArrayView2<'_, T>, codewords: ArrayView2<'_, T>) -> Result<Vec<usize>> {
    if rows.ncols() != codewords.ncols() {
        return Err(RecastError::Dimension {
            context: "quantize patch dim",
            expected: codewords.ncols(),
            actual: rows.ncols(),
        });
    }
    Ok(rows.outer_iter().map(|r| nearest_codeword(codewords, r)).collect())
}

/// Quantizes the reduced patches of a window (`(C · N) × dim`, channel-major).
pub fn quantize<T: Scalar>(reduced: ArrayView2<'_, T>, channels: usize, codebook: &Codebook<T>) -> Result<QuantizedSeries> {
    if channels == 0 || !reduced.nrows().is_multiple_of(channels) {
        return Err(RecastError::Dimension {
            context: "quantize rows per channel",
            expected: channels,
            actual: reduced.nrows(),
        });
    }
    let labels = quantize_rows(reduced, codebook.codewords.view())?;
    let per_channel = reduced.nrows() / channels;
    let indices = Array2::from_shape_vec((channels, per_channel), labels).expect("row count checked");
    Ok(QuantizedSeries {
        indices,
        codebook_epoch: codebook.epoch,
    })
}

/// Rebuilds a `C × len` signal by expanding and concatenating each channel's
/// codewords, truncating the tail beyond `len`.
pub fn reconstruct<T: Scalar>(
    q: &QuantizedSeries,
    codebook: &Codebook<T>,
    len: usize,
    reduction: Reduction,
) -> Result<Array2<T>> {
    if q.codebook_epoch != codebook.epoch {
        return Err(RecastError::Epoch {
            expected: codebook.epoch,
            actual: q.codebook_epoch,
        });
    }
    let (channels, per_channel) = q.indices.dim();
    let span = match reduction {
        Reduction::Halve => codebook.dim() * 2,
        Reduction::Keep => codebook.dim(),
    };
    if per_channel * span < len {
        return Err(RecastError::Dimension {
            context: "reconstruct length",
            expected: len,
            actual: per_channel * span,
        });
    }
    let mut out = Array2::zeros((channels, len));
    for c in 0..channels {
        for j in 0..per_channel {
            let id = q.indices[[c, j]];
            if id >= codebook.k() {
                return Err(RecastError::IndexOutOfRange { index: id, k: codebook.k() });
            }
            let piece = reduction.expand(codebook.codewords.row(id));
            for (o, v) in piece.iter().enumerate() {
                let t = j * span + o;
                if t < len {
                    out[[c, t]] = *v;
                }
            }
        }
    }
    Ok(out)
}

/// First-epoch codebook: a verbatim copy of the epoch-1 pseudo codebook.
pub fn init_codebook<T: Scalar>(pseudo: &PseudoCodebook<T>) -> Result<Codebook<T>> {
    if pseudo.epoch != 1 {
        return Err(RecastError::Epoch {
            expected: 1,
            actual: pseudo.epoch,
        });
    }
    Codebook::new(pseudo.centers.clone(), 1)
}

/// `S^t = S^{t−1} + (1/t)(diag(W) Ŝ^t − S^{t−1})` with `t = previous.epoch + 1`.
pub fn incremental_update<T: Scalar>(
    previous: &Codebook<T>,
    pseudo: &PseudoCodebook<T>,
    weights: ArrayView1<'_, T>,
) -> Result<Codebook<T>> {
    let t = previous.epoch + 1;
    if pseudo.epoch != t || t < 2 {
        return Err(RecastError::Epoch {
            expected: t,
            actual: pseudo.epoch,
        });
    }
    if pseudo.centers.dim() != previous.codewords.dim() {
        return Err(RecastError::Shape {
            context: "incremental update",
            left: previous.codewords.shape().to_vec(),
            right: pseudo.centers.shape().to_vec(),
        });
    }
    if weights.len() != previous.k() {
        return Err(RecastError::Dimension {
            context: "update weights",
            expected: previous.k(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(RecastError::NonFinite("update weights"));
    }
    let step = T::one() / T::from_usize_lossy(t);
    let mut next = previous.codewords.clone();
    for (k, mut row) in next.outer_iter_mut().enumerate() {
        let w = weights[k];
        for (s, &p) in row.iter_mut().zip(pseudo.centers.row(k).iter()) {
            *s = *s + step * (w * p - *s);
        }
    }
    Codebook::new(next, t)
}
