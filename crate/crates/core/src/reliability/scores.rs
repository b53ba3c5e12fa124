use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::codebook::Assignment;
use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

/// Reliability scores of one pseudo codeword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple<T> {
    /// Representational quality, in `[0, 1)`.
    pub rep: T,
    /// Historical consistency, in `(0, 1]`.
    pub delta: T,
    /// Out-of-distribution sensitivity, in `[0, 1)`.
    pub je: T,
}

impl<T: Scalar> ScoreTriple<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.rep, self.delta, self.je]
    }

    pub fn mean(&self) -> T {
        (self.rep + self.delta + self.je) / T::lit(3.0)
    }
}

pub fn score_triples<T: Scalar>(rep: &Array1<T>, delta: &Array1<T>, je: &Array1<T>) -> Vec<ScoreTriple<T>> {
    rep.iter()
        .zip(delta.iter())
        .zip(je.iter())
        .map(|((&rep, &delta), &je)| ScoreTriple { rep, delta, je })
        .collect()
}

fn sq_dist<T: Scalar>(a: ndarray::ArrayView1<'_, T>, b: ndarray::ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn check_dims<T: Scalar>(patches: ArrayView2<'_, T>, centers: ArrayView2<'_, T>) -> Result<()> {
    if patches.nrows() == 0 {
        return Err(RecastError::data("reliability scoring needs at least one patch"));
    }
    if patches.ncols() != centers.ncols() {
        return Err(RecastError::Dimension {
            context: "score patch dim",
            expected: centers.ncols(),
            actual: patches.ncols(),
        });
    }
    Ok(())
}

/// `w_rep,k = 1 − exp(E_k − E_tot)`, where `E_k` is the squared error of the
/// patches assigned to center `k` and `E_tot` its sum over clusters.
pub fn score_rep<T: Scalar>(
    patches: ArrayView2<'_, T>,
    centers: ArrayView2<'_, T>,
    assignment: &Assignment,
) -> Result<Array1<T>> {
    check_dims(patches, centers)?;
    if assignment.labels.len() != patches.nrows() || assignment.k() != centers.nrows() {
        return Err(RecastError::Dimension {
            context: "score assignment",
            expected: patches.nrows(),
            actual: assignment.labels.len(),
        });
    }
    let mut errors = Array1::<T>::zeros(centers.nrows());
    for (p, &l) in patches.outer_iter().zip(&assignment.labels) {
        errors[l] += sq_dist(p, centers.row(l));
    }
    let total = errors.sum();
    Ok(errors.mapv(|e| T::one() - (e - total).exp()))
}

/// `w_Δ,k = exp(d_k − d_tot)` with `d_k = ‖ŝ_k − s_k‖²` against the previous codebook.
pub fn score_delta<T: Scalar>(centers: ArrayView2<'_, T>, previous: ArrayView2<'_, T>) -> Result<Array1<T>> {
    if centers.dim() != previous.dim() {
        return Err(RecastError::Shape {
            context: "score delta",
            left: centers.shape().to_vec(),
            right: previous.shape().to_vec(),
        });
    }
    let deviations: Array1<T> = centers
        .outer_iter()
        .zip(previous.outer_iter())
        .map(|(a, b)| sq_dist(a, b))
        .collect();
    let total = deviations.sum();
    Ok(deviations.mapv(|d| (d - total).exp()))
}

/// `w_je,k = 1 − exp(A_k − A_tot)`, `A_k` the L1 distance of every sampled patch to center `k`.
pub fn score_je<T: Scalar>(patches: ArrayView2<'_, T>, centers: ArrayView2<'_, T>) -> Result<Array1<T>> {
    check_dims(patches, centers)?;
    let spread: Array1<T> = centers
        .outer_iter()
        .map(|c| {
            patches
                .outer_iter()
                .map(|p| p.iter().zip(c.iter()).map(|(&a, &b)| (a - b).abs()).sum::<T>())
                .sum::<T>()
        })
        .collect();
    let total = spread.sum();
    Ok(spread.mapv(|a| T::one() - (a - total).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn rep_hand_exponentials() {
        // cluster 0 has zero error, cluster 1 squared error ln 4
        let e = 4.0f64.ln().sqrt();
        let patches = array![[0.0], [1.0 + e]];
        let centers = array![[0.0], [1.0]];
        let a = Assignment::from_labels(vec![0, 1], 2);
        let w = score_rep(patches.view(), centers.view(), &a).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-12);
        assert!(w[1].abs() < 1e-12);
    }

    #[test]
    fn rep_zero_error_is_zero() {
        let patches = array![[1.0, 2.0], [3.0, 4.0]];
        let a = Assignment::from_labels(vec![0, 1], 2);
        let w = score_rep(patches.view(), patches.view(), &a).unwrap();
        assert_eq!(w, array![0.0, 0.0]);
    }

    #[test]
    fn rep_rejects_empty() {
        let patches = Array2::<f64>::zeros((0, 2));
        let a = Assignment::from_labels(vec![], 1);
        assert!(score_rep(patches.view(), Array2::zeros((1, 2)).view(), &a).is_err());
    }

    #[test]
    fn delta_hand_exponentials() {
        let e = 2.0f64.ln().sqrt();
        let centers = array![[0.0], [e]];
        let prev = array![[0.0], [0.0]];
        let w = score_delta(centers.view(), prev.view()).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_fixed_point_is_one() {
        let c = array![[0.3, 0.1], [2.0, -1.0]];
        assert_eq!(score_delta(c.view(), c.view()).unwrap(), array![1.0, 1.0]);
    }

    #[test]
    fn je_single_codeword_is_zero() {
        let patches = array![[0.0, 1.0], [2.0, 2.0]];
        let w = score_je(patches.view(), array![[1.0, 1.0]].view()).unwrap();
        assert_eq!(w, array![0.0]);
    }

    #[test]
    fn je_symmetric_pair() {
        let patches = array![[0.0], [2.0]];
        let centers = array![[0.5], [1.5]];
        // A_1 = A_2 = 2, A_tot = 4
        let w = score_je(patches.view(), centers.view()).unwrap();
        let expected = 1.0 - (-2.0f64).exp();
        assert!((w[0] - expected).abs() < 1e-15 && (w[1] - expected).abs() < 1e-15);
    }
}
