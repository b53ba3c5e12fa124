use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

/// Patches of a normalized `C × L` window, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet<T> {
    /// `(C · N) × L_p`; row `c · N + j` is patch `j` of channel `c`.
    pub patches: Array2<T>,
    /// `(channel, patch_position)` per row.
    pub index_map: Vec<(usize, usize)>,
    pub patch_len: usize,
    pub patches_per_channel: usize,
    pub channels: usize,
    /// Original window length `L`.
    pub series_len: usize,
}

impl<T: Scalar> PatchSet<T> {
    /// Values appended to each channel's last patch.
    pub fn padding(&self) -> usize {
        self.patches_per_channel * self.patch_len - self.series_len
    }

    /// Reduced patches `(C · N) × (L_p / factor)` as fed to the codebook.
    pub fn reduced(&self, reduction: Reduction) -> Result<Array2<T>> {
        let dim = reduction.codeword_dim(self.patch_len)?;
        let mut out = Array2::zeros((self.patches.nrows(), dim));
        for (mut dst, src) in out.outer_iter_mut().zip(self.patches.outer_iter()) {
            dst.assign(&reduction.reduce(src)?);
        }
        Ok(out)
    }
}

/// Splits each channel into `N = ceil(L / L_p)` patches. A partial final patch
/// is right-padded by repeating the channel's last value.
pub fn patchify<T: Scalar>(x: ArrayView2<'_, T>, patch_len: usize) -> Result<PatchSet<T>> {
    if patch_len < 2 || !patch_len.is_multiple_of(2) {
        return Err(RecastError::config(format!("patch length must be even and ≥ 2, got {patch_len}")));
    }
    let (channels, len) = x.dim();
    if len == 0 {
        return Err(RecastError::config("cannot patchify an empty window"));
    }
    let per_channel = len.div_ceil(patch_len);
    let mut patches = Array2::zeros((channels * per_channel, patch_len));
    let mut index_map = Vec::with_capacity(channels * per_channel);
    for c in 0..channels {
        let last = x[[c, len - 1]];
        for j in 0..per_channel {
            let mut row = patches.row_mut(c * per_channel + j);
            for (k, v) in row.iter_mut().enumerate() {
                let t = j * patch_len + k;
                *v = if t < len { x[[c, t]] } else { last };
            }
            index_map.push((c, j));
        }
    }
    Ok(PatchSet {
        patches,
        index_map,
        patch_len,
        patches_per_channel: per_channel,
        channels,
        series_len: len,
    })
}

/// Concatenates each channel's patches and drops the padding.
pub fn unpatchify<T: Scalar>(set: &PatchSet<T>) -> Array2<T> {
    let mut out = Array2::zeros((set.channels, set.series_len));
    for c in 0..set.channels {
        let rows = set
            .patches
            .slice(s![c * set.patches_per_channel..(c + 1) * set.patches_per_channel, ..]);
        for (t, v) in rows.iter().take(set.series_len).enumerate() {
            out[[c, t]] = *v;
        }
    }
    out
}

/// Adjacent-pair mean pooling: `out[j] = (in[2j] + in[2j+1]) / 2`.
pub fn downsample<T: Scalar>(patch: ArrayView1<'_, T>) -> Result<Array1<T>> {
    if !patch.len().is_multiple_of(2) {
        return Err(RecastError::config(format!("cannot downsample odd length {}", patch.len())));
    }
    let half = T::lit(0.5);
    Ok(Array1::from_shape_fn(patch.len() / 2, |j| (patch[2 * j] + patch[2 * j + 1]) * half))
}

/// Nearest-neighbour upsampling: each value repeated twice.
pub fn upsample<T: Scalar>(v: ArrayView1<'_, T>) -> Array1<T> {
    Array1::from_shape_fn(v.len() * 2, |i| v[i / 2])
}

/// How patches are brought into codeword space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Pair pooling to `L_p / 2`, expanded back by repetition.
    #[default]
    Halve,
    /// Codewords live at full patch resolution.
    Keep,
}

impl Reduction {
    pub fn codeword_dim(self, patch_len: usize) -> Result<usize> {
        match self {
            Reduction::Halve if !patch_len.is_multiple_of(2) => Err(RecastError::config(format!(
                "patch length {patch_len} is odd and cannot be halved"
            ))),
            Reduction::Halve => Ok(patch_len / 2),
            Reduction::Keep => Ok(patch_len),
        }
    }

    pub fn reduce<T: Scalar>(self, patch: ArrayView1<'_, T>) -> Result<Array1<T>> {
        match self {
            Reduction::Halve => downsample(patch),
            Reduction::Keep => Ok(patch.to_owned()),
        }
    }

    pub fn expand<T: Scalar>(self, codeword: ArrayView1<'_, T>) -> Array1<T> {
        match self {
            Reduction::Halve => upsample(codeword),
            Reduction::Keep => codeword.to_owned(),
        }
    }

    /// Adjoint of [`Reduction::expand`]: sums gradient entries that share a source value.
    pub fn expand_adjoint<T: Scalar>(self, grad: ArrayView1<'_, T>) -> Array1<T> {
        match self {
            Reduction::Halve => Array1::from_shape_fn(grad.len() / 2, |j| grad[2 * j] + grad[2 * j + 1]),
            Reduction::Keep => grad.to_owned(),
        }
    }
}

/// Stacks the reduced patches of a `C × L` window.
pub fn reduced_patches<T: Scalar>(x_norm: ArrayView2<'_, T>, patch_len: usize, reduction: Reduction) -> Result<Array2<T>> {
    patchify(x_norm, patch_len)?.reduced(reduction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn divisible_window_has_no_padding() {
        let x = Array2::<f64>::zeros((3, 96));
        let set = patchify(x.view(), 16).unwrap();
        assert_eq!(set.patches_per_channel, 6);
        assert_eq!(set.patches.nrows(), 18);
        assert_eq!(set.padding(), 0);
    }

    #[test]
    fn partial_patch_repeats_last_value() {
        let x = Array2::from_shape_fn((1, 10), |(_, t)| t as f64);
        let set = patchify(x.view(), 4).unwrap();
        assert_eq!(set.patches_per_channel, 3);
        assert_eq!(set.padding(), 2);
        assert_eq!(set.patches.row(2).to_vec(), vec![8.0, 9.0, 9.0, 9.0]);
        assert_eq!(set.index_map[2], (0, 2));
    }

    #[test]
    fn unpatchify_inverts_patchify() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((4, 37), |_| rng.random_range(-5.0..5.0));
        let set = patchify(x.view(), 8).unwrap();
        assert_eq!(unpatchify(&set), x);
    }

    #[test]
    fn rejects_odd_patch_length() {
        let x = Array2::<f64>::zeros((1, 9));
        assert!(patchify(x.view(), 3).is_err());
        assert!(patchify(x.view(), 0).is_err());
    }

    #[test]
    fn downsample_examples() {
        assert_eq!(downsample(array![1.0, 1.0, 3.0, 3.0].view()).unwrap(), array![1.0, 3.0]);
        assert_eq!(downsample(Array1::from_elem(6, 2.0).view()).unwrap(), Array1::from_elem(3, 2.0));
        let ramp = Array1::from_shape_fn(16, |i| i as f64);
        let expected = Array1::from_shape_fn(8, |j| 2.0 * j as f64 + 0.5);
        assert_eq!(downsample(ramp.view()).unwrap(), expected);
        assert!(downsample(array![1.0, 2.0, 3.0].view()).is_err());
    }

    #[test]
    fn upsample_repeats() {
        assert_eq!(upsample(array![1.0, 3.0].view()), array![1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn upsample_of_downsample_on_pair_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let half = Array1::from_shape_fn(8, |_| rng.random_range(-2.0..2.0));
        let patch = upsample(half.view());
        assert_eq!(upsample(downsample(patch.view()).unwrap().view()), patch);
    }

    #[test]
    fn expand_adjoint_matches_inner_products() {
        // <expand(v), g> == <v, expand_adjoint(g)>
        let v = array![0.5, -1.0, 2.0];
        let g = array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let lhs = Reduction::Halve.expand(v.view()).dot(&g);
        let rhs = v.dot(&Reduction::Halve.expand_adjoint(g.view()));
        assert_eq!(lhs, rhs);
    }
}
