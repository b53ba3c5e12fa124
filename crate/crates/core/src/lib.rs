//! Reliability-aware, codebook-assisted time-series forecasting.
//!
//! Lookback windows are instance-normalized, cut into patches and quantized
//! against a codebook of local shapes. A small MLP forecasts future codewords
//! while a second MLP forecasts the residual the codebook cannot express. The
//! codebook itself is rebuilt every epoch by Lloyd clustering and merged into a
//! running weighted average whose weights come from three reliability scores
//! fused by a KL-ball robust softmin.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which training uses.

pub mod codebook;
pub mod error;
pub mod forecaster;
pub mod nn;
pub mod pipeline;
pub mod reliability;
mod scalar;
pub mod series;
pub mod verify;

pub use error::{RecastError, Result};
pub use scalar::Scalar;

pub type Mlp64 = nn::Mlp<f64>;
pub type SeriesFrame64 = series::SeriesFrame<f64>;
pub type WindowPair64 = series::WindowPair<f64>;
pub type Codebook64 = codebook::Codebook<f64>;
pub type PseudoCodebook64 = codebook::PseudoCodebook<f64>;
pub type DualPathModel64 = forecaster::DualPathModel<f64>;
pub type ForecastOutput64 = forecaster::ForecastOutput<f64>;
pub type Checkpoint64 = pipeline::Checkpoint<f64>;

pub type Mlp32 = nn::Mlp<f32>;
pub type Codebook32 = codebook::Codebook<f32>;
pub type DualPathModel32 = forecaster::DualPathModel<f32>;
