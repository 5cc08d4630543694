//! Self-supervised trainers at desk scale.
//!
//! Two objectives share the same skeleton: an online branch that is trained
//! by gradient descent and a target branch that trails it by an exponential
//! moving average. The bootstrap trainer ([`byol`]) regresses predicted
//! online features onto target features; the noise-contrastive trainer
//! ([`nce`]) classifies the matching target key against a FIFO queue of
//! stale keys. Both insert the simplex layer between encoder and projector,
//! with separate online and target temperatures.
//!
//! The target branch runs value-only forwards, so stop-gradient holds by
//! construction: no tape node ever refers to a target parameter.

pub mod augment;
pub mod byol;
pub mod loss;
pub mod nce;
pub mod schedule;

pub use augment::{augment_image, augment_vector, AugmentParams};
pub use byol::{train_byol, ByolRun, ByolSpec, ByolState};
pub use loss::{byol_loss, byol_loss_tape, nce_loss, nce_loss_tape, NceForm};
pub use nce::{train_nce, NceRun, NceSpec, NceState};
pub use schedule::cosine_lr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, DatasetHandle};
use crate::error::{Error, Result};
use crate::rng::shuffled_indices;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Optimization schedule shared by both trainers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainConfig<S: Scalar = f64> {
    pub base_lr: S,
    pub weight_decay: S,
    pub epochs: usize,
    pub batch_size: usize,
    /// Hard cap on optimization steps; `None` runs `epochs` full passes.
    pub steps: Option<usize>,
    /// Cosine-decay the learning rate over the resolved total step count.
    pub cosine_decay: bool,
    pub seed: u64,
    pub augment: AugmentParams<S>,
}

impl<S: Scalar> TrainConfig<S> {
    pub fn validate(&self) -> Result<()> {
        // Zero is admitted as a diagnostic no-update mode.
        if !(self.base_lr.is_finite() && self.base_lr >= S::zero()) {
            return Err(Error::param("base learning rate must be finite and nonnegative"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= S::zero()) {
            return Err(Error::param("weight decay must be nonnegative"));
        }
        if self.epochs == 0 && self.steps.is_none() {
            return Err(Error::param("training needs epochs or a step cap"));
        }
        if self.batch_size < 2 {
            return Err(Error::param("batch size must be at least 2"));
        }
        Ok(())
    }

    /// Total optimization steps for a dataset of `n` samples.
    pub fn total_steps(&self, n: usize) -> Result<usize> {
        if self.batch_size > n {
            return Err(Error::param(format!(
                "batch size {} exceeds dataset size {n}",
                self.batch_size
            )));
        }
        let per_epoch = n / self.batch_size;
        let by_epochs = self.epochs.saturating_mul(per_epoch);
        let total = match self.steps {
            Some(cap) if self.epochs == 0 => cap,
            Some(cap) => cap.min(by_epochs),
            None => by_epochs,
        };
        if total == 0 {
            return Err(Error::param("resolved step count is zero"));
        }
        Ok(total)
    }
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        TrainConfig {
            base_lr: S::of(0.1),
            weight_decay: S::of(1e-4),
            epochs: 10,
            batch_size: 64,
            steps: None,
            cosine_decay: true,
            seed: 0,
            augment: AugmentParams::default(),
        }
    }
}

/// Epoch-shuffled batch scheduler; partial tail batches are dropped.
pub(crate) struct BatchPlan {
    n: usize,
    batch: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchPlan {
    pub(crate) fn new(n: usize, batch: usize) -> Self {
        BatchPlan { n, batch, order: Vec::new(), cursor: 0 }
    }

    pub(crate) fn next(&mut self, rng: &mut impl Rng) -> Vec<usize> {
        if self.cursor + self.batch > self.order.len() {
            self.order = shuffled_indices(self.n, rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        out
    }
}

/// Draws two stochastic views of each indexed sample, as [B, dim] tensors.
/// Per sample the first view's randomness is consumed before the second's.
pub(crate) fn make_views<S: Scalar>(
    ds: &DatasetHandle<S>,
    idx: &[usize],
    params: &AugmentParams<S>,
    rng: &mut impl Rng,
) -> Result<(Tensor<S>, Tensor<S>)> {
    let d = ds.dim();
    let mut a = Vec::with_capacity(idx.len() * d);
    let mut b = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        let x = ds.x(i);
        match ds.kind {
            DataKind::Images { c, h, w } => {
                a.extend(augment::augment_image(x, c, h, w, params, rng)?);
                b.extend(augment::augment_image(x, c, h, w, params, rng)?);
            }
            DataKind::Vectors { .. } => {
                a.extend(augment::augment_vector(x, params, rng)?);
                b.extend(augment::augment_vector(x, params, rng)?);
            }
        }
    }
    Ok((Tensor::new([idx.len(), d], a)?, Tensor::new([idx.len(), d], b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_steps_resolution() {
        let mut cfg = TrainConfig::<f64> { epochs: 3, batch_size: 10, ..Default::default() };
        assert_eq!(cfg.total_steps(95).unwrap(), 27);
        cfg.steps = Some(5);
        assert_eq!(cfg.total_steps(95).unwrap(), 5);
        cfg.epochs = 0;
        assert_eq!(cfg.total_steps(95).unwrap(), 5);
        assert!(cfg.total_steps(5).is_err());
    }

    #[test]
    fn config_validation() {
        let good = TrainConfig::<f64>::default();
        assert!(good.validate().is_ok());
        let zero_lr = TrainConfig::<f64> { base_lr: 0.0, ..Default::default() };
        assert!(zero_lr.validate().is_ok());
        let bad = TrainConfig::<f64> { base_lr: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig::<f64> { batch_size: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
