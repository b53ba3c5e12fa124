use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    /// Tanh approximation of GELU.
    Gelu,
}

impl std::str::FromStr for Activation {
    type Err = RecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "gelu" => Ok(Self::Gelu),
            _ => Err(RecastError::config(format!("unknown activation {s:?} (relu|gelu)"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Relu => "relu",
            Self::Gelu => "gelu",
        })
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Gelu => {
                let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
                T::lit(0.5) * x * (T::one() + inner.tanh())
            }
        }
    }

    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Gelu => {
                let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
                let t = inner.tanh();
                let d_inner = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x * x);
                T::lit(0.5) * (T::one() + t) + T::lit(0.5) * x * (T::one() - t * t) * d_inner
            }
        }
    }
}

/// Fully connected layer computing `weights · x + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    /// `out_dim × in_dim`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((out_dim, in_dim), |_| T::lit(rng.random_range(-bound..=bound)));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Multi-layer perceptron; `activation` is applied between layers, never on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
    pub activation: Activation,
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// Input to each layer, `batch × in_dim`.
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer, `batch × out_dim`.
    pre_activations: Vec<Array2<T>>,
}

impl<T> MlpCache<T> {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.nrows())
    }
}

/// Gradients with the same layout as the [`Mlp`] they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Builds a network with layer widths `dims[0] → dims[1] → … → dims[n]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(RecastError::config("an MLP needs at least input and output widths"));
        }
        if dims.contains(&0) {
            return Err(RecastError::config("MLP layer widths must be positive"));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self { layers, activation })
    }

    /// Wraps explicit layers, checking that adjacent widths agree.
    pub fn from_layers(layers: Vec<DenseLayer<T>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(RecastError::config("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(RecastError::Dimension {
                    context: if i == 0 { "mlp layer 1 input" } else { "mlp layer input" },
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.out_dim() {
                return Err(RecastError::Dimension {
                    context: "mlp bias",
                    expected: layer.out_dim(),
                    actual: layer.bias.len(),
                });
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    /// Forward pass over a batch of row vectors.
    pub fn forward(&self, input: ArrayView2<'_, T>) -> Result<(Array2<T>, MlpCache<T>)> {
        if input.ncols() != self.in_dim() {
            return Err(RecastError::Dimension {
                context: "mlp input",
                expected: self.in_dim(),
                actual: input.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut current = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights.t());
            z += &layer.bias;
            inputs.push(current);
            if i == last {
                current = z;
            } else {
                let act = self.activation;
                current = z.mapv(|v| act.apply(v));
                pre_activations.push(z);
            }
        }
        Ok((
            current,
            MlpCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass on a single input vector.
    pub fn forward_one(&self, input: ArrayView1<'_, T>) -> Result<(Array1<T>, MlpCache<T>)> {
        let batch = input.insert_axis(Axis(0));
        let (out, cache) = self.forward(batch)?;
        Ok((out.row(0).to_owned(), cache))
    }

    /// Backpropagates `output_gradient` (`batch × out_dim`) through the cached pass.
    pub fn backward(&self, cache: &MlpCache<T>, output_gradient: ArrayView2<'_, T>) -> Result<MlpGrads<T>> {
        self.check_cache(cache, output_gradient)?;
        let last = self.layers.len() - 1;
        let mut grads: Vec<DenseLayer<T>> = Vec::with_capacity(self.layers.len());
        let mut upstream = output_gradient.to_owned();
        for i in (0..self.layers.len()).rev() {
            let dz = if i == last {
                upstream
            } else {
                let act = self.activation;
                let mut dz = upstream;
                dz.zip_mut_with(&cache.pre_activations[i], |g, &z| *g *= act.derivative(z));
                dz
            };
            let weights = dz.t().dot(&cache.inputs[i]);
            let bias = dz.sum_axis(Axis(0));
            if i > 0 {
                upstream = dz.dot(&self.layers[i].weights);
            } else {
                upstream = Array2::zeros((0, 0));
            }
            grads.push(DenseLayer { weights, bias });
        }
        grads.reverse();
        Ok(MlpGrads { layers: grads })
    }

    fn check_cache(&self, cache: &MlpCache<T>, output_gradient: ArrayView2<'_, T>) -> Result<()> {
        let stale = |msg: &str| Err(RecastError::Internal(format!("mismatched forward cache: {msg}")));
        if cache.inputs.len() != self.layers.len() || cache.pre_activations.len() + 1 != self.layers.len() {
            return stale("layer count");
        }
        let batch = cache.batch_size();
        for (i, layer) in self.layers.iter().enumerate() {
            if cache.inputs[i].dim() != (batch, layer.in_dim()) {
                return stale("layer input shape");
            }
            if i + 1 < self.layers.len() && cache.pre_activations[i].dim() != (batch, layer.out_dim()) {
                return stale("pre-activation shape");
            }
        }
        if output_gradient.dim() != (batch, self.out_dim()) {
            return stale("output gradient shape");
        }
        Ok(())
    }

    pub(crate) fn flat_get(&self, index: usize) -> T {
        let (layer, is_bias, offset) = locate(&self.layers, index);
        let l = &self.layers[layer];
        if is_bias {
            l.bias[offset]
        } else {
            let cols = l.weights.ncols();
            l.weights[[offset / cols, offset % cols]]
        }
    }

    pub(crate) fn flat_set(&mut self, index: usize, value: T) {
        let (layer, is_bias, offset) = locate(&self.layers, index);
        let l = &mut self.layers[layer];
        if is_bias {
            l.bias[offset] = value;
        } else {
            let cols = l.weights.ncols();
            l.weights[[offset / cols, offset % cols]] = value;
        }
    }
}

fn locate<T: Scalar>(layers: &[DenseLayer<T>], mut index: usize) -> (usize, bool, usize) {
    for (i, layer) in layers.iter().enumerate() {
        if index < layer.weights.len() {
            return (i, false, index);
        }
        index -= layer.weights.len();
        if index < layer.bias.len() {
            return (i, true, index);
        }
        index -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|v| v * factor);
            l.bias.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    pub fn max_abs(&self) -> T {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn matches(&self, mlp: &Mlp<T>) -> bool {
        self.layers.len() == mlp.layers.len()
            && self
                .layers
                .iter()
                .zip(&mlp.layers)
                .all(|(g, p)| g.weights.dim() == p.weights.dim() && g.bias.len() == p.bias.len())
    }

    pub(crate) fn flat_get(&self, index: usize) -> T {
        let (layer, is_bias, offset) = locate(&self.layers, index);
        let l = &self.layers[layer];
        if is_bias {
            l.bias[offset]
        } else {
            let cols = l.weights.ncols();
            l.weights[[offset / cols, offset % cols]]
        }
    }
}
