use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::reliability::ScoreTriple;
use crate::scalar::Scalar;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_ORACLE_RESOLUTION: usize = 400;

/// Robust fusion `−γ · log Σ_i exp(−z_i / γ)`, evaluated around `min z`.
pub fn dro_fuse<T: Scalar>(z: &ScoreTriple<T>, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(RecastError::config(format!("gamma must be positive, got {gamma}")));
    }
    let z = z.as_array();
    let m = z.iter().cloned().fold(T::infinity(), T::min);
    let sum: T = z.iter().map(|&v| (-(v - m) / gamma).exp()).sum();
    Ok(m - gamma * sum.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// `min_θ ⟨θ, z⟩ + γ·KL(θ‖u)` minus `γ·log 3`, after refinement.
    pub value: f64,
    pub theta: [f64; 3],
    /// Same quantity from the base lattice alone.
    pub coarse_value: f64,
}

fn kl_objective(theta: [f64; 3], z: [f64; 3], gamma: f64) -> f64 {
    let mut linear = 0.0;
    let mut kl = 0.0;
    for i in 0..3 {
        linear += theta[i] * z[i];
        if theta[i] > 0.0 {
            kl += theta[i] * (3.0 * theta[i]).ln();
        }
    }
    linear + gamma * kl
}

/// Brute-force minimum of `⟨θ, z⟩ + γ·KL(θ‖u)` over the probability simplex.
///
/// The base search is the barycentric lattice with `resolution` steps per
/// edge. Two local lattice refinements around the best point follow, each
/// 100× finer, because a minimizer with a coordinate below the lattice spacing
/// otherwise costs up to `γ · θ_i` of accuracy.
pub fn kl_ball_oracle(z: [f64; 3], gamma: f64, resolution: usize) -> Result<OracleResult> {
    if resolution < 100 {
        return Err(RecastError::config("oracle resolution must be at least 100"));
    }
    if !(gamma > 0.0) {
        return Err(RecastError::config("gamma must be positive"));
    }
    let r = resolution as f64;
    let mut best = f64::INFINITY;
    let mut best_theta = [1.0 / 3.0; 3];
    for i in 0..=resolution {
        for j in 0..=resolution - i {
            let k = resolution - i - j;
            let theta = [i as f64 / r, j as f64 / r, k as f64 / r];
            let v = kl_objective(theta, z, gamma);
            if v < best {
                best = v;
                best_theta = theta;
            }
        }
    }
    let offset = gamma * 3f64.ln();
    let coarse_value = best - offset;

    const STEPS: i64 = 100;
    let mut half_width = 2.0 / r;
    for _ in 0..2 {
        let centre = best_theta;
        let step = half_width / STEPS as f64;
        for a in -STEPS..=STEPS {
            for b in -STEPS..=STEPS {
                let t0 = centre[0] + a as f64 * step;
                let t1 = centre[1] + b as f64 * step;
                let t2 = 1.0 - t0 - t1;
                if t0 < 0.0 || t1 < 0.0 || t2 < 0.0 {
                    continue;
                }
                let theta = [t0, t1, t2];
                let v = kl_objective(theta, z, gamma);
                if v < best {
                    best = v;
                    best_theta = theta;
                }
            }
        }
        half_width = 2.0 * step;
    }
    Ok(OracleResult {
        value: best - offset,
        theta: best_theta,
        coarse_value,
    })
}

/// How the three scores of a codeword collapse into one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionRule<T> {
    Dro { gamma: T },
    /// Plain average of the three scores.
    Mean,
}

/// Final scale of the update weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightNorm {
    /// `K · softmax(fused)`: positive, mean exactly 1.
    #[default]
    MeanOne,
    /// `softmax(fused)`: positive, sums to 1.
    SumOne,
}

impl FromStr for WeightNorm {
    type Err = RecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_one" => Ok(Self::MeanOne),
            "sum_one" => Ok(Self::SumOne),
            _ => Err(RecastError::config(format!("unknown weight norm {s:?} (mean_one|sum_one)"))),
        }
    }
}

impl std::fmt::Display for WeightNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MeanOne => "mean_one",
            Self::SumOne => "sum_one",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityWeights<T> {
    pub fused: Array1<T>,
    pub normalized: Array1<T>,
    /// `None` when fusion was the plain mean.
    pub gamma: Option<T>,
}

pub fn fuse_and_normalize<T: Scalar>(scores: &[ScoreTriple<T>], gamma: T, norm: WeightNorm) -> Result<ReliabilityWeights<T>> {
    fuse_with(scores, FusionRule::Dro { gamma }, norm)
}

pub fn fuse_with<T: Scalar>(scores: &[ScoreTriple<T>], rule: FusionRule<T>, norm: WeightNorm) -> Result<ReliabilityWeights<T>> {
    if scores.is_empty() {
        return Err(RecastError::config("cannot fuse scores of an empty codebook"));
    }
    let fused: Array1<T> = scores
        .iter()
        .map(|z| match rule {
            FusionRule::Dro { gamma } => dro_fuse(z, gamma),
            FusionRule::Mean => Ok(z.mean()),
        })
        .collect::<Result<_>>()?;
    if fused.iter().any(|v| !v.is_finite()) {
        return Err(RecastError::NonFinite("fused reliability"));
    }
    let max = fused.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps = fused.mapv(|v| (v - max).exp());
    let total = exps.sum();
    let scale = match norm {
        WeightNorm::MeanOne => T::from_usize_lossy(scores.len()),
        WeightNorm::SumOne => T::one(),
    };
    let normalized = exps.mapv(|e| scale * e / total);
    Ok(ReliabilityWeights {
        fused,
        normalized,
        gamma: match rule {
            FusionRule::Dro { gamma } => Some(gamma),
            FusionRule::Mean => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(a: f64, b: f64, c: f64) -> ScoreTriple<f64> {
        ScoreTriple { rep: a, delta: b, je: c }
    }

    #[test]
    fn equal_scores() {
        let w = dro_fuse(&z(0.5, 0.5, 0.5), 1.0).unwrap();
        assert!((w - (0.5 - 3f64.ln())).abs() < 1e-15);
        assert!((w - -0.5986).abs() < 1e-4);
    }

    #[test]
    fn small_gamma_approaches_min() {
        let w = dro_fuse(&z(0.2, 0.5, 0.9), 0.01).unwrap();
        assert!((w - 0.2).abs() < 1e-4);
    }

    #[test]
    fn unit_gamma_value() {
        let w = dro_fuse(&z(0.2, 0.5, 0.9), 1.0).unwrap();
        let direct = -((-0.2f64).exp() + (-0.5f64).exp() + (-0.9f64).exp()).ln();
        assert!((w - direct).abs() < 1e-15);
        assert!((w - -0.605_316_052_683_375_5).abs() < 1e-12);
        let oracle = kl_ball_oracle([0.2, 0.5, 0.9], 1.0, 400).unwrap();
        assert!((oracle.value - w).abs() < 1e-4);
    }

    #[test]
    fn rejects_non_positive_gamma() {
        assert!(dro_fuse(&z(0.1, 0.2, 0.3), 0.0).is_err());
        assert!(dro_fuse(&z(0.1, 0.2, 0.3), -1.0).is_err());
    }

    #[test]
    fn oracle_uniform_minimizer() {
        let r = kl_ball_oracle([0.4, 0.4, 0.4], 1.0, 400).unwrap();
        assert!(r.theta.iter().all(|t| (t - 1.0 / 3.0).abs() < 1e-3));
    }

    #[test]
    fn oracle_small_gamma_concentrates() {
        let r = kl_ball_oracle([0.7, 0.1, 0.5], 0.01, 400).unwrap();
        assert!(r.theta[1] > 0.99);
    }

    #[test]
    fn oracle_rejects_coarse_grid() {
        assert!(kl_ball_oracle([0.0; 3], 1.0, 50).is_err());
    }

    #[test]
    fn identical_scores_give_unit_weights() {
        let scores = vec![z(0.3, 0.6, 0.2); 5];
        let w = fuse_and_normalize(&scores, 1.0, WeightNorm::MeanOne).unwrap();
        assert!(w.normalized.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let one = fuse_and_normalize(&scores[..1], 1.0, WeightNorm::MeanOne).unwrap();
        assert_eq!(one.normalized.to_vec(), vec![1.0]);
    }

    #[test]
    fn sum_one_mode() {
        let scores = vec![z(0.1, 0.9, 0.3), z(0.5, 0.2, 0.8), z(0.0, 1.0, 0.0)];
        let w = fuse_and_normalize(&scores, 0.5, WeightNorm::SumOne).unwrap();
        assert!((w.normalized.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_rule_averages() {
        let scores = vec![z(0.3, 0.6, 0.9)];
        let w = fuse_with(&scores, FusionRule::Mean, WeightNorm::MeanOne).unwrap();
        assert!((w.fused[0] - 0.6).abs() < 1e-15);
        assert!(w.gamma.is_none());
    }

    #[test]
    fn parses_weight_norm() {
        assert_eq!("mean_one".parse::<WeightNorm>().unwrap(), WeightNorm::MeanOne);
        assert_eq!("sum_one".parse::<WeightNorm>().unwrap(), WeightNorm::SumOne);
        assert!("other".parse::<WeightNorm>().is_err());
    }
}
