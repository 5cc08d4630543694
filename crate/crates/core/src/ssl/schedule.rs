//! Learning-rate schedule.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-cosine decay from `base_lr` at step 0 to exactly 0 at `total_steps`.
pub fn cosine_lr<S: Scalar>(step: usize, total_steps: usize, base_lr: S) -> Result<S> {
    if total_steps == 0 {
        return Err(Error::param("cosine schedule needs total_steps >= 1"));
    }
    if step > total_steps {
        return Err(Error::param(format!(
            "step {step} is past the end of the schedule ({total_steps})"
        )));
    }
    if !(base_lr.is_finite() && base_lr >= S::zero()) {
        return Err(Error::param("base learning rate must be finite and nonnegative"));
    }
    let frac = step as f64 / total_steps as f64;
    let factor = 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
    Ok(base_lr * S::of(factor))
}
