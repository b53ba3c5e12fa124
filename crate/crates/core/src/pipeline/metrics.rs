use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::PreparedSplit;
use crate::codebook::Codebook;
use crate::error::{RecastError, Result};
use crate::forecaster::{forward_batch, DualPathModel, QuantHead};
use crate::scalar::Scalar;
use crate::series::WindowPair;

const EVAL_CHUNK: usize = 64;

/// Errors in the original scale, averaged over windows, channels and horizon steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// Number of scored values.
    pub count: usize,
}

fn finish(sq: f64, abs: f64, count: usize) -> Result<Metrics> {
    if count == 0 {
        return Err(RecastError::data("cannot evaluate an empty window set"));
    }
    Ok(Metrics {
        mse: sq / count as f64,
        mae: abs / count as f64,
        count,
    })
}

/// Chunks run in parallel; their partial sums are combined in chunk order so
/// the result does not depend on scheduling.
pub fn evaluate_prepared<T: Scalar>(
    model: &DualPathModel<T>,
    codebook: &Codebook<T>,
    split: &PreparedSplit<T>,
) -> Result<Metrics> {
    if split.is_empty() {
        return Err(RecastError::data("cannot evaluate an empty window set"));
    }
    let indices: Vec<usize> = (0..split.len()).collect();
    let partials = indices
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<_> = chunk.iter().map(|&i| &split.windows[i]).collect();
            let fwd = forward_batch(model, codebook, &refs, QuantHead::Snap)?;
            let (mut sq, mut abs, mut count) = (0.0, 0.0, 0usize);
            for (o, &i) in fwd.outputs.iter().zip(chunk) {
                for (p, t) in o.y_hat.iter().zip(split.targets[i].iter()) {
                    let d = (*p - *t).as_f64();
                    sq += d * d;
                    abs += d.abs();
                    count += 1;
                }
            }
            Ok((sq, abs, count))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sq, abs, count) = partials
        .into_iter()
        .fold((0.0, 0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    finish(sq, abs, count)
}

pub fn evaluate<T: Scalar>(model: &DualPathModel<T>, codebook: &Codebook<T>, windows: &[WindowPair<T>]) -> Result<Metrics> {
    evaluate_prepared(model, codebook, &PreparedSplit::from_pairs(windows, &model.dims)?)
}

/// Repeat-last-value baseline: every horizon step predicts the final lookback value.
pub fn naive_metrics<T: Scalar>(windows: &[WindowPair<T>]) -> Result<Metrics> {
    let (mut sq, mut abs, mut count) = (0.0, 0.0, 0usize);
    for w in windows {
        let last = w.x.ncols().checked_sub(1).ok_or_else(|| RecastError::data("empty lookback"))?;
        for (c, row) in w.y.outer_iter().enumerate() {
            let pred = w.x[[c, last]];
            for &t in row {
                let d = (pred - t).as_f64();
                sq += d * d;
                abs += d.abs();
                count += 1;
            }
        }
    }
    finish(sq, abs, count)
}
