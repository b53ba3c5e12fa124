use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NORM_EPS: f64 = 1e-5;

/// Per-channel statistics of one lookback window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats<T> {
    pub mean: Array1<T>,
    /// `sqrt(var + eps)`, always positive.
    pub std: Array1<T>,
    pub eps: T,
}

/// Standardizes each channel of `x` with its own mean and (population) variance.
pub fn instance_normalize<T: Scalar>(x: ArrayView2<'_, T>, eps: T) -> (Array2<T>, NormStats<T>) {
    let len = T::from_usize_lossy(x.ncols().max(1));
    let mean = x.sum_axis(Axis(1)) / len;
    let mut std = Array1::zeros(x.nrows());
    for (c, row) in x.outer_iter().enumerate() {
        let var = row.iter().map(|&v| (v - mean[c]) * (v - mean[c])).sum::<T>() / len;
        std[c] = (var + eps).sqrt();
    }
    let mut out = x.to_owned();
    for (c, mut row) in out.outer_iter_mut().enumerate() {
        row.mapv_inplace(|v| (v - mean[c]) / std[c]);
    }
    (out, NormStats { mean, std, eps })
}

/// Inverse of [`instance_normalize`] applied to a `C × H` block.
pub fn instance_denormalize<T: Scalar>(y_norm: ArrayView2<'_, T>, stats: &NormStats<T>) -> Result<Array2<T>> {
    if y_norm.nrows() != stats.mean.len() {
        return Err(RecastError::Dimension {
            context: "denormalize channels",
            expected: stats.mean.len(),
            actual: y_norm.nrows(),
        });
    }
    let mut out = y_norm.to_owned();
    for (c, mut row) in out.outer_iter_mut().enumerate() {
        row.mapv_inplace(|v| v * stats.std[c] + stats.mean[c]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = DEFAULT_NORM_EPS;

    #[test]
    fn constant_channel_maps_to_zero() {
        let (out, stats) = instance_normalize(array![[5.0, 5.0, 5.0, 5.0]].view(), EPS);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        assert!((stats.std[0] - EPS.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair() {
        let (out, _) = instance_normalize(array![[-1.0, 1.0]].view(), EPS);
        let scale = 1.0 / (1.0 + EPS).sqrt();
        assert!((out[[0, 0]] + scale).abs() < 1e-15);
        assert!((out[[0, 1]] - scale).abs() < 1e-15);
    }

    #[test]
    fn normalized_channels_have_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((4, 96), |_| rng.random_range(-50.0..80.0));
        let (out, _) = instance_normalize(x.view(), EPS);
        for row in out.outer_iter() {
            assert!(row.mean().unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((3, 24), |_| rng.random_range(-1e3..1e3));
        let (norm, stats) = instance_normalize(x.view(), EPS);
        let back = instance_denormalize(norm.view(), &stats).unwrap();
        assert!(back.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn denormalize_zero_gives_mean() {
        let stats = NormStats {
            mean: array![1.0, -2.0],
            std: array![3.0, 0.5],
            eps: EPS,
        };
        let y = instance_denormalize(Array2::zeros((2, 3)).view(), &stats).unwrap();
        assert_eq!(y, array![[1.0, 1.0, 1.0], [-2.0, -2.0, -2.0]]);
    }

    #[test]
    fn unit_stats_are_identity() {
        let stats = NormStats {
            mean: array![0.0],
            std: array![1.0],
            eps: EPS,
        };
        let y = array![[0.25, -4.0, 9.5]];
        assert_eq!(instance_denormalize(y.view(), &stats).unwrap(), y);
    }

    #[test]
    fn denormalize_checks_channels() {
        let stats = NormStats {
            mean: array![0.0],
            std: array![1.0],
            eps: EPS,
        };
        assert!(instance_denormalize(Array2::<f64>::zeros((2, 3)).view(), &stats).is_err());
    }
}
