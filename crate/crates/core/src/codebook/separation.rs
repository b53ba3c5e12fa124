use ndarray::{Array2, ArrayView2};

use crate::scalar::Scalar;

const TAU_FLOOR: f64 = 1e-12;

fn temperature<T: Scalar>(centers: ArrayView2<'_, T>) -> T {
    let frob: T = centers.iter().map(|&v| v * v).sum();
    frob.max(T::lit(TAU_FLOOR))
}

fn pair_terms<T: Scalar>(centers: ArrayView2<'_, T>, tau: T) -> Array2<T> {
    let k = centers.nrows();
    Array2::from_shape_fn((k, k), |(i, j)| {
        let d: T = centers
            .row(i)
            .iter()
            .zip(centers.row(j).iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        (-d / tau).exp()
    })
}

/// `log Σ_{i,j} exp(−‖s_i − s_j‖² / τ)` with `τ = ‖S‖_F²`, self-pairs included.
pub fn separation_loss<T: Scalar>(centers: ArrayView2<'_, T>) -> T {
    if centers.nrows() == 0 {
        return T::zero();
    }
    let tau = temperature(centers);
    pair_terms(centers, tau).sum().ln()
}

/// Loss and its gradient with respect to the centers, holding `τ` fixed.
pub fn separation_gradient<T: Scalar>(centers: ArrayView2<'_, T>) -> (T, Array2<T>) {
    let k = centers.nrows();
    let mut grad = Array2::zeros(centers.dim());
    if k == 0 {
        return (T::zero(), grad);
    }
    let tau = temperature(centers);
    let terms = pair_terms(centers, tau);
    let total = terms.sum();
    // dL/ds_a = −(4/τ) Σ_j p_aj (s_a − s_j),  p = terms / total (symmetric)
    let scale = -T::lit(4.0) / (tau * total);
    for a in 0..k {
        for j in 0..k {
            let p = terms[[a, j]];
            for d in 0..centers.ncols() {
                grad[[a, d]] += scale * p * (centers[[a, d]] - centers[[j, d]]);
            }
        }
    }
    (total.ln(), grad)
}

/// One gradient step of size `step` on the separation loss; returns the loss before the step.
pub fn separation_step<T: Scalar>(centers: &mut Array2<T>, step: T) -> T {
    let (loss, grad) = separation_gradient(centers.view());
    centers.zip_mut_with(&grad, |c, &g| *c -= step * g);
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_center_is_zero() {
        assert_eq!(separation_loss(array![[0.3, -1.0]].view()), 0.0);
    }

    #[test]
    fn identical_pair_is_log_four() {
        let loss = separation_loss(array![[1.0, 2.0], [1.0, 2.0]].view());
        assert!((loss - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let tau: f64 = c.iter().map(|v| v * v).sum();
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..5).map(|t| (c[[i, t]] - c[[j, t]]).powi(2)).sum();
                s += (-d / tau).exp();
            }
        }
        assert!((separation_loss(c.view()) - s.ln()).abs() < 1e-14);
    }

    #[test]
    fn separating_coincident_centers_lowers_loss() {
        let together: Array2<f64> = array![[1.0, 1.0], [1.0, 1.0], [-1.0, 0.5]];
        let apart: Array2<f64> = array![[1.2, 1.0], [0.8, 1.0], [-1.0, 0.5]];
        let tau = temperature(together.view());
        let l0 = pair_terms(together.view(), tau).sum().ln();
        let l1 = pair_terms(apart.view(), tau).sum().ln();
        assert!(l1 < l0);
    }

    #[test]
    fn gradient_matches_differences_with_frozen_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Array2<f64> = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let tau = temperature(c.view());
        let (_, grad) = separation_gradient(c.view());
        let h = 1e-6;
        for i in 0..3 {
            for d in 0..4 {
                let mut plus = c.clone();
                plus[[i, d]] += h;
                let mut minus = c.clone();
                minus[[i, d]] -= h;
                let num = (pair_terms(plus.view(), tau).sum().ln() - pair_terms(minus.view(), tau).sum().ln()) / (2.0 * h);
                assert!((num - grad[[i, d]]).abs() < 1e-8, "{num} vs {}", grad[[i, d]]);
            }
        }
    }

    #[test]
    fn step_reduces_loss() {
        let mut c = array![[0.5, 0.5], [0.6, 0.4], [-1.0, 0.0]];
        let before = separation_loss(c.view());
        separation_step(&mut c, 0.01);
        assert!(separation_loss(c.view()) < before);
    }
}
