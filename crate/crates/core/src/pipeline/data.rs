use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{RecastError, Result};
use crate::forecaster::{prepare_window, ModelDims, PreparedWindow};
use crate::scalar::Scalar;
use crate::series::{make_windows, split_frame, DatasetKind, SeriesFrame, WindowPair};

/// Independent random streams drawn from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngPurpose {
    ModelInit = 0,
    PatchSample = 1,
    ClusterInit = 2,
    Shuffle = 3,
}

/// Deterministic generator for `(seed, epoch, purpose)`.
pub fn stream_rng(seed: u64, epoch: usize, purpose: RngPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 8) | purpose as u64);
    rng
}

/// Uniform sample of `floor(n · ratio)` rows without replacement, kept in
/// their original order. Falls back to every row when that count is zero.
pub fn sample_patches<T: Scalar>(all: ArrayView2<'_, T>, ratio: f64, seed: u64, epoch: usize) -> Result<Array2<T>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(RecastError::config(format!("sample ratio must lie in (0, 1], got {ratio}")));
    }
    let n = all.nrows();
    let take = (n as f64 * ratio).floor() as usize;
    if take == 0 || take >= n {
        return Ok(all.to_owned());
    }
    let mut rng = stream_rng(seed, epoch, RngPurpose::PatchSample);
    let mut picked = rand::seq::index::sample(&mut rng, n, take).into_vec();
    picked.sort_unstable();
    Ok(all.select(Axis(0), &picked))
}

/// Windows of one split, normalized and patchified once.
#[derive(Debug, Clone)]
pub struct PreparedSplit<T> {
    pub windows: Vec<PreparedWindow<T>>,
    pub targets: Vec<Array2<T>>,
    /// Last lookback value of every channel, for the repeat-last baseline.
    pub last_values: Vec<Vec<T>>,
}

impl<T: Scalar> PreparedSplit<T> {
    pub fn from_pairs(pairs: &[WindowPair<T>], dims: &ModelDims) -> Result<Self> {
        let windows = pairs
            .iter()
            .map(|p| prepare_window(p.x.view(), dims))
            .collect::<Result<Vec<_>>>()?;
        for p in pairs {
            if p.y.ncols() != dims.horizon {
                return Err(RecastError::Dimension {
                    context: "window horizon",
                    expected: dims.horizon,
                    actual: p.y.ncols(),
                });
            }
        }
        Ok(Self {
            windows,
            targets: pairs.iter().map(|p| p.y.clone()).collect(),
            last_values: pairs
                .iter()
                .map(|p| p.x.column(p.x.ncols() - 1).to_vec())
                .collect(),
        })
    }

    pub fn from_frame(frame: &SeriesFrame<T>, dims: &ModelDims, stride: usize) -> Result<Self> {
        Self::from_pairs(&make_windows(frame, dims.lookback, dims.horizon, stride), dims)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Reduced patches of every window stacked in window order.
    pub fn patch_pool(&self) -> Result<Array2<T>> {
        if self.windows.is_empty() {
            return Err(RecastError::data("no windows to draw patches from"));
        }
        let views: Vec<_> = self.windows.iter().map(|w| w.reduced.view()).collect();
        concatenate(Axis(0), &views).map_err(|e| RecastError::Internal(e.to_string()))
    }
}

/// Chronological train/valid/test frames of one dataset.
#[derive(Debug, Clone)]
pub struct Datasets<T> {
    pub train: SeriesFrame<T>,
    pub valid: SeriesFrame<T>,
    pub test: SeriesFrame<T>,
}

impl<T: Scalar> Datasets<T> {
    /// Splits so that every part holds at least one `L + H` window.
    pub fn split(frame: &SeriesFrame<T>, kind: DatasetKind, dims: &ModelDims) -> Result<Self> {
        let (train, valid, test) = split_frame(frame, kind, dims.lookback + dims.horizon)?;
        Ok(Self { train, valid, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Reduction;

    fn pool(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64)
    }

    #[test]
    fn full_ratio_is_identity() {
        let p = pool(10);
        assert_eq!(sample_patches(p.view(), 1.0, 1, 1).unwrap(), p);
    }

    #[test]
    fn half_of_hundred_is_fifty_distinct() {
        let p = pool(100);
        let s = sample_patches(p.view(), 0.5, 3, 2).unwrap();
        assert_eq!(s.nrows(), 50);
        let mut firsts: Vec<i64> = s.column(0).iter().map(|&v| v as i64).collect();
        firsts.dedup();
        assert_eq!(firsts.len(), 50);
        assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn replay_and_reseeding() {
        let p = pool(100);
        let a = sample_patches(p.view(), 0.5, 3, 2).unwrap();
        assert_eq!(a, sample_patches(p.view(), 0.5, 3, 2).unwrap());
        assert_ne!(a, sample_patches(p.view(), 0.5, 3, 3).unwrap());
        assert_ne!(a, sample_patches(p.view(), 0.5, 4, 2).unwrap());
    }

    #[test]
    fn tiny_pool_falls_back_to_everything() {
        let p = pool(1);
        assert_eq!(sample_patches(p.view(), 0.5, 0, 1).unwrap().nrows(), 1);
        assert!(sample_patches(p.view(), 0.0, 0, 1).is_err());
    }

    #[test]
    fn split_pools_patches_in_window_order() {
        let frame = SeriesFrame::from_values(Array2::from_shape_fn((2, 40), |(c, t)| ((c + 1) * t) as f64)).unwrap();
        let dims = ModelDims::new(16, 8, 8, 2, Reduction::Halve, 1e-5).unwrap();
        let split = PreparedSplit::from_frame(&frame, &dims, 4).unwrap();
        assert_eq!(split.len(), 5);
        let pool = split.patch_pool().unwrap();
        assert_eq!(pool.dim(), (5 * 2 * 2, 4));
        assert_eq!(pool.row(4), split.windows[1].reduced.row(0));
        assert_eq!(split.last_values[0], vec![15.0, 30.0]);
    }
}
