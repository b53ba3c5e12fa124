use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;
use crate::series::SeriesFrame;

/// Parameters of the synthetic motif dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub channels: usize,
    pub length: usize,
    /// Number of motif occurrences across all channels.
    pub motif_count: usize,
    /// Number of distinct motif shapes the occurrences are drawn from.
    pub template_count: usize,
    pub motif_len: usize,
    pub noise_std: f64,
    pub periods: [f64; 2],
    pub amplitudes: [f64; 2],
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            channels: 3,
            length: 3000,
            motif_count: 60,
            template_count: 3,
            motif_len: 24,
            noise_std: 0.1,
            periods: [24.0, 168.0],
            amplitudes: [1.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifPlacement {
    pub channel: usize,
    pub start: usize,
    pub template: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub frame: SeriesFrame<T>,
    pub templates: Vec<Vec<f64>>,
    pub placements: Vec<MotifPlacement>,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(RecastError::config(format!("invalid synthetic spec: {msg}")));
        if self.channels == 0 || self.length == 0 {
            return bad("channels and length must be positive");
        }
        if self.motif_count > 0 && (self.motif_len == 0 || self.template_count == 0) {
            return bad("motifs need a positive length and at least one template");
        }
        if self.motif_len > self.length {
            return bad("motif longer than series");
        }
        if self.motif_count * self.motif_len > self.channels * self.length / 2 {
            return bad("motifs would cover more than half the series");
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return bad("noise level must be finite and non-negative");
        }
        if self.periods.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return bad("periods must be positive");
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return bad("amplitudes must be finite");
        }
        Ok(())
    }
}

/// Deterministic synthetic series: two sinusoids per channel (phase shifted by
/// channel), overwritten at logged positions by recurring motif templates, plus
/// Gaussian noise.
pub fn synth_generate<T: Scalar>(spec: &SynthSpec, seed: u64) -> Result<SynthOutput<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (channels, length) = (spec.channels, spec.length);

    let mut values = Array2::<f64>::from_shape_fn((channels, length), |(c, t)| {
        let phase = TAU * c as f64 / channels as f64;
        let t = t as f64;
        spec.amplitudes[0] * (TAU * t / spec.periods[0] + phase).sin()
            + spec.amplitudes[1] * (TAU * t / spec.periods[1] + phase).sin()
    });

    let templates: Vec<Vec<f64>> = if spec.motif_count == 0 {
        Vec::new()
    } else {
        (0..spec.template_count).map(|_| motif_template(spec.motif_len, &mut rng)).collect()
    };

    let mut placements: Vec<MotifPlacement> = Vec::with_capacity(spec.motif_count);
    for _ in 0..spec.motif_count {
        let template = rng.random_range(0..templates.len());
        let mut placed = None;
        for _ in 0..10_000 {
            let channel = rng.random_range(0..channels);
            let start = rng.random_range(0..=length - spec.motif_len);
            let overlaps = placements.iter().any(|p| {
                p.channel == channel && start < p.start + spec.motif_len && p.start < start + spec.motif_len
            });
            if !overlaps {
                placed = Some(MotifPlacement { channel, start, template });
                break;
            }
        }
        let placement = placed.ok_or_else(|| RecastError::config("could not place motifs without overlap"))?;
        for (i, v) in templates[template].iter().enumerate() {
            values[[placement.channel, placement.start + i]] = *v;
        }
        placements.push(placement);
    }

    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| RecastError::config(e.to_string()))?;
        values.mapv_inplace(|v| v + normal.sample(&mut rng));
    }

    let frame = SeriesFrame::new(values.mapv(T::lit), (0..channels).map(|c| format!("ch{c}")).collect())?;
    Ok(SynthOutput {
        frame,
        templates,
        placements,
    })
}

/// Smoothed random walk rescaled to peak amplitude 2.
fn motif_template(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut walk = Vec::with_capacity(len);
    let mut level = 0.0;
    let mut velocity = 0.0;
    for _ in 0..len {
        velocity = 0.7 * velocity + rng.random_range(-1.0..1.0);
        level += velocity;
        walk.push(level);
    }
    let mean = walk.iter().sum::<f64>() / len as f64;
    let peak = walk.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max).max(1e-9);
    walk.iter().map(|v| 2.0 * (v - mean) / peak).collect()
}
