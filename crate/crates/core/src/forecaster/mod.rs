//! Dual-path forecaster: a quantization path that predicts future codewords
//! from codeword embeddings, and a residual path that predicts what the
//! codebook reconstruction misses.

mod model;
mod paths;
mod training;

pub use model::{DualPathModel, ModelDims};
pub use paths::{
    embed_indices, forward, forward_batch, prepare_window, quant_path_backward, quant_path_forward,
    residual_path_forward, BatchForward, ForecastOutput, PreparedWindow, QuantHead, QuantPathOutput,
};
pub use training::{training_loss, DualGrads, LossBreakdown};
