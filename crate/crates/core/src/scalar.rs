use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar used by every numerical routine in the crate.
///
/// Implemented for `f32` and `f64`. Training and verification run in `f64`;
/// `f32` is available for inference-sized workloads.
pub trait Scalar: NdFloat + FromPrimitive + ToPrimitive + Default + Sum {
    /// Converts an `f64` literal into the scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("usize representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sign with `sign(0) == 0`, the subgradient convention used by the L1 loss.
pub(crate) fn sign0<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}
