use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{RecastError, Result};
use crate::scalar::{sign0, Scalar};

/// Mean absolute error and its (sub)gradient with respect to `prediction`.
///
/// The subgradient at a zero residual is 0.
pub fn l1_loss<T: Scalar>(prediction: ArrayView2<'_, T>, target: ArrayView2<'_, T>) -> Result<(T, Array2<T>)> {
    if prediction.dim() != target.dim() {
        return Err(RecastError::Shape {
            context: "l1 loss",
            left: prediction.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    let count = prediction.len();
    if count == 0 {
        return Ok((T::zero(), Array2::zeros(prediction.dim())));
    }
    let n = T::from_usize_lossy(count);
    let mut total = T::zero();
    let mut gradient = Array2::zeros(prediction.dim());
    Zip::from(&mut gradient)
        .and(&prediction)
        .and(&target)
        .for_each(|g, &p, &t| {
            let r = p - t;
            total += r.abs();
            *g = sign0(r) / n;
        });
    Ok((total / n, gradient))
}
