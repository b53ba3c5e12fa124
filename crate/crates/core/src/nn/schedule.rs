use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

/// Cosine annealing: `base_lr · ½ · (1 + cos(π · epoch / total_epochs))`.
///
/// `epoch` is zero-based and must be below `total_epochs`.
pub fn cosine_lr<T: Scalar>(base_lr: T, epoch: usize, total_epochs: usize) -> Result<T> {
    if total_epochs == 0 {
        return Err(RecastError::config("cosine schedule needs at least one epoch"));
    }
    if epoch >= total_epochs {
        return Err(RecastError::config(format!(
            "epoch {epoch} outside schedule of {total_epochs} epochs"
        )));
    }
    let progress = epoch as f64 / total_epochs as f64;
    let factor = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
    Ok(base_lr * T::lit(factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_base_rate() {
        assert_eq!(cosine_lr(3e-4, 0, 30).unwrap(), 3e-4);
    }

    #[test]
    fn midpoint_is_half() {
        let lr: f64 = cosine_lr(1.0, 15, 30).unwrap();
        assert!((lr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_increasing_and_positive() {
        for total in [1usize, 2, 7, 30] {
            let rates: Vec<f64> = (0..total).map(|e| cosine_lr(1.0, e, total).unwrap()).collect();
            assert!(rates.windows(2).all(|w| w[1] <= w[0]));
            assert!(*rates.last().unwrap() > 0.0);
        }
    }

    #[test]
    fn rejects_empty_schedule() {
        assert!(cosine_lr(1.0, 0, 0).is_err());
        assert!(cosine_lr(1.0, 5, 5).is_err());
    }
}
