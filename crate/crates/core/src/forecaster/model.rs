use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::nn::{Activation, Mlp};
use crate::scalar::Scalar;
use crate::series::Reduction;

/// Static shape of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Lookback length `L`.
    pub lookback: usize,
    /// Forecast horizon `H`.
    pub horizon: usize,
    /// Patch length `L_p`.
    pub patch_len: usize,
    pub reduction: Reduction,
    /// Codeword length (`L_p / 2`, or `L_p` without reduction).
    pub codeword_dim: usize,
    /// `N = ceil(L / L_p)`.
    pub patches_in: usize,
    /// `N_y = ceil(H / L_p)`.
    pub patches_out: usize,
    /// Codebook size `K`.
    pub codebook_size: usize,
    pub norm_eps: f64,
}

impl ModelDims {
    pub fn new(
        lookback: usize,
        horizon: usize,
        patch_len: usize,
        codebook_size: usize,
        reduction: Reduction,
        norm_eps: f64,
    ) -> Result<Self> {
        if lookback == 0 || horizon == 0 {
            return Err(RecastError::config("lookback and horizon must be positive"));
        }
        if patch_len < 2 || !patch_len.is_multiple_of(2) {
            return Err(RecastError::config(format!("patch length must be even and ≥ 2, got {patch_len}")));
        }
        if codebook_size == 0 {
            return Err(RecastError::config("codebook size must be positive"));
        }
        if !(norm_eps > 0.0) {
            return Err(RecastError::config("normalization epsilon must be positive"));
        }
        Ok(Self {
            lookback,
            horizon,
            patch_len,
            reduction,
            codeword_dim: reduction.codeword_dim(patch_len)?,
            patches_in: lookback.div_ceil(patch_len),
            patches_out: horizon.div_ceil(patch_len),
            codebook_size,
            norm_eps,
        })
    }

    pub fn quant_in(&self) -> usize {
        self.patches_in * self.codeword_dim
    }

    pub fn quant_out(&self) -> usize {
        self.patches_out * self.codeword_dim
    }
}

/// Parameters of both forecasting paths. The codebook is held separately and
/// passed to every forward call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPathModel<T> {
    /// Embedded input patches → continuous future codeword chunks.
    pub quant_mlp: Mlp<T>,
    /// Residual lookback → residual horizon.
    pub res_mlp: Mlp<T>,
    pub dims: ModelDims,
    /// When false the residual path contributes zero and is never trained.
    pub residual_enabled: bool,
}

impl<T: Scalar> DualPathModel<T> {
    pub fn new<R: Rng + ?Sized>(
        dims: ModelDims,
        quant_hidden: usize,
        res_hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let quant_mlp = Mlp::new(&[dims.quant_in(), quant_hidden, dims.quant_out()], activation, rng)?;
        let res_mlp = Mlp::new(&[dims.lookback, res_hidden, dims.horizon], activation, rng)?;
        Ok(Self {
            quant_mlp,
            res_mlp,
            dims,
            residual_enabled: true,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.quant_mlp.is_finite() && self.res_mlp.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let d = ModelDims::new(96, 96, 16, 8, Reduction::Halve, 1e-5).unwrap();
        assert_eq!((d.patches_in, d.patches_out, d.codeword_dim), (6, 6, 8));
        assert_eq!((d.quant_in(), d.quant_out()), (48, 48));
    }

    #[test]
    fn horizon_not_multiple_of_patch() {
        let d = ModelDims::new(96, 100, 16, 8, Reduction::Halve, 1e-5).unwrap();
        assert_eq!(d.patches_out, 7);
    }

    #[test]
    fn full_resolution_codewords() {
        let d = ModelDims::new(96, 96, 16, 8, Reduction::Keep, 1e-5).unwrap();
        assert_eq!(d.codeword_dim, 16);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(ModelDims::new(96, 96, 15, 8, Reduction::Halve, 1e-5).is_err());
        assert!(ModelDims::new(0, 96, 16, 8, Reduction::Halve, 1e-5).is_err());
        assert!(ModelDims::new(96, 96, 16, 0, Reduction::Halve, 1e-5).is_err());
    }
}
