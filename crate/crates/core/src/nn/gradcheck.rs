use crate::error::Result;
use crate::nn::mlp::{Mlp, MlpGrads};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Magnitude below which errors are measured absolutely rather than relatively.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the parameter with the largest relative error.
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences of its loss value, parameter by parameter.
///
/// Relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn grad_check<T, F>(params: &Mlp<T>, loss_fn: F, options: GradCheckOptions) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&Mlp<T>) -> Result<(T, MlpGrads<T>)>,
{
    let (_, analytic) = loss_fn(params)?;
    let mut probe = params.clone();
    let h = T::lit(options.step);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        checked: 0,
        tolerance: options.tolerance,
    };
    for index in 0..params.num_params() {
        let original = params.flat_get(index);
        probe.flat_set(index, original + h);
        let (plus, _) = loss_fn(&probe)?;
        probe.flat_set(index, original - h);
        let (minus, _) = loss_fn(&probe)?;
        probe.flat_set(index, original);

        let numeric = ((plus - minus) / (h + h)).as_f64();
        let exact = analytic.flat_get(index).as_f64();
        let abs = (exact - numeric).abs();
        let rel = abs / exact.abs().max(numeric.abs()).max(options.floor);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = index;
        }
        report.checked += 1;
    }
    Ok(report)
}
