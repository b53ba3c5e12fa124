use crate::error::{RecastError, Result};
use crate::nn::mlp::{Mlp, MlpGrads};
use crate::scalar::Scalar;

/// Moment estimates for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub first_moment: MlpGrads<T>,
    pub second_moment: MlpGrads<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(mlp: &Mlp<T>) -> Self {
        Self::with_hyperparameters(mlp, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn with_hyperparameters(mlp: &Mlp<T>, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            first_moment: MlpGrads::zeros_like(mlp),
            second_moment: MlpGrads::zeros_like(mlp),
            step_count: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients abort the step and
/// leave both `params` and `state` untouched.
pub fn adam_step<T: Scalar>(params: &mut Mlp<T>, grads: &MlpGrads<T>, state: &mut AdamState<T>, lr: T) -> Result<()> {
    if !grads.matches(params) || !state.first_moment.matches(params) {
        return Err(RecastError::Internal("adam: gradient/parameter layout mismatch".into()));
    }
    if !grads.is_finite() {
        return Err(RecastError::NonFinite("adam gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let correction1 = T::one() - b1.powi(t);
    let correction2 = T::one() - b2.powi(t);

    let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for (((layer, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.first_moment.layers)
        .zip(&mut state.second_moment.layers)
    {
        ndarray::Zip::from(&mut layer.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    if !params.is_finite() {
        return Err(RecastError::NonFinite("parameters after adam step"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer};
    use ndarray::{array, Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(w: f64) -> Mlp<f64> {
        Mlp::from_layers(
            vec![DenseLayer {
                weights: array![[w]],
                bias: Array1::zeros(1),
            }],
            Activation::Relu,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = Mlp::<f64>::new(&[3, 5, 2], Activation::Relu, &mut rng).unwrap();
        let before = mlp.clone();
        let mut state = AdamState::new(&mlp);
        let zero = MlpGrads::zeros_like(&mlp);
        adam_step(&mut mlp, &zero, &mut state, 0.1).unwrap();
        assert_eq!(mlp, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut mlp = scalar_net(1.0);
        let mut state = AdamState::new(&mlp);
        let mut g = MlpGrads::zeros_like(&mlp);
        g.layers[0].weights[[0, 0]] = 2.5;
        g.layers[0].bias[0] = -0.7;
        adam_step(&mut mlp, &g, &mut state, 0.01).unwrap();
        assert!((mlp.layers[0].weights[[0, 0]] - (1.0 - 0.01)).abs() < 1e-8);
        assert!((mlp.layers[0].bias[0] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn descends_on_square() {
        // f(w) = w^2, gradient 2w
        let mut mlp = scalar_net(1.0);
        let mut state = AdamState::new(&mlp);
        let mut prev = 1.0;
        for _ in 0..3 {
            let mut g = MlpGrads::zeros_like(&mlp);
            g.layers[0].weights[[0, 0]] = 2.0 * mlp.layers[0].weights[[0, 0]];
            adam_step(&mut mlp, &g, &mut state, 0.1).unwrap();
            let w = mlp.layers[0].weights[[0, 0]];
            assert!(w < prev);
            prev = w;
        }
        assert_eq!(state.step_count, 3);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut mlp = scalar_net(1.0);
        let mut state = AdamState::new(&mlp);
        let mut g = MlpGrads::zeros_like(&mlp);
        g.layers[0].weights[[0, 0]] = f64::NAN;
        assert!(matches!(
            adam_step(&mut mlp, &g, &mut state, 0.1),
            Err(RecastError::NonFinite(_))
        ));
        assert_eq!(state.step_count, 0);
        assert_eq!(mlp.layers[0].weights[[0, 0]], 1.0);
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut mlp = Mlp::<f64>::new(&[4, 6, 3], Activation::Relu, &mut rng).unwrap();
            let mut state = AdamState::new(&mlp);
            let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
            for _ in 0..10 {
                let (out, cache) = mlp.forward(x.view()).unwrap();
                let grads = mlp.backward(&cache, out.view()).unwrap();
                adam_step(&mut mlp, &grads, &mut state, 1e-2).unwrap();
            }
            mlp
        };
        let a = run();
        let b = run();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert!(la.weights.iter().zip(lb.weights.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(la.bias.iter().zip(lb.bias.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
