use ndarray::{s, Array2};

use crate::scalar::Scalar;
use crate::series::SeriesFrame;

/// Lookback window `x` (`C × L`) and the horizon `y` (`C × H`) that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair<T> {
    pub x: Array2<T>,
    pub y: Array2<T>,
    pub origin_index: usize,
}

/// Number of windows `make_windows` produces: `floor((T − L − H) / stride) + 1`, or 0.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    match len.checked_sub(lookback + horizon) {
        Some(span) => span / stride.max(1) + 1,
        None => 0,
    }
}

/// Sliding windows at origins `0, stride, 2·stride, …`.
pub fn make_windows<T: Scalar>(
    frame: &SeriesFrame<T>,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Vec<WindowPair<T>> {
    let stride = stride.max(1);
    let count = window_count(frame.len(), lookback, horizon, stride);
    (0..count)
        .map(|i| {
            let origin = i * stride;
            WindowPair {
                x: frame.values.slice(s![.., origin..origin + lookback]).to_owned(),
                y: frame
                    .values
                    .slice(s![.., origin + lookback..origin + lookback + horizon])
                    .to_owned(),
                origin_index: origin,
            }
        })
        .collect()
}
