//! Bootstrap trainer: online encoder/projector/predictor chasing an EMA
//! target, with the simplex layer between encoder and projector on both
//! branches.

use serde::{Deserialize, Serialize};

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::nn::{EncoderSpec, Mlp};
use crate::rng::{self, named_stream, word_pos_parts};
use crate::scalar::Scalar;
use crate::sem::{self, SemConfig};
use crate::ssl::loss::byol_loss_tape;
use crate::ssl::schedule::cosine_lr;
use crate::ssl::{make_views, BatchPlan, TrainConfig};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Architecture of a bootstrap run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ByolSpec<S: Scalar = f64> {
    pub encoder: EncoderSpec,
    /// Simplex shape and online temperature.
    pub sem: SemConfig<S>,
    /// Target temperature; `None` shares the online value.
    pub tau_target: Option<S>,
    pub proj_hidden: usize,
    pub proj_dim: usize,
    /// EMA rate alpha; the target keeps alpha of itself per step.
    pub ema_rate: S,
}

impl<S: Scalar> ByolSpec<S> {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.encoder.repr_dim != self.sem.dim() {
            return Err(Error::param(format!(
                "encoder width {} must equal simplex width {}",
                self.encoder.repr_dim,
                self.sem.dim()
            )));
        }
        if self.proj_hidden == 0 || self.proj_dim == 0 {
            return Err(Error::param("projector dimensions must be positive"));
        }
        if !(self.ema_rate >= S::zero() && self.ema_rate <= S::one()) {
            return Err(Error::param("ema rate must lie in [0, 1]"));
        }
        if let Some(tt) = self.tau_target {
            if !(tt.is_finite() && tt > S::zero()) {
                return Err(Error::param("target temperature must be positive"));
            }
        }
        Ok(())
    }
}

/// Online and target networks plus the step counter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ByolState<S: Scalar = f64> {
    pub online_encoder: Mlp<S>,
    pub online_projector: Mlp<S>,
    pub predictor: Mlp<S>,
    pub target_encoder: Mlp<S>,
    pub target_projector: Mlp<S>,
    pub sem_online: SemConfig<S>,
    pub sem_target: SemConfig<S>,
    pub ema_rate: S,
    pub step: usize,
}

impl<S: Scalar> ByolState<S> {
    /// Fresh state with target parameters equal to online parameters.
    pub fn new(spec: &ByolSpec<S>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut init = named_stream(seed, rng::INIT);
        let online_encoder = Mlp::encoder(&spec.encoder, &mut init)?;
        let width = spec.sem.dim();
        let online_projector = Mlp::two_layer(width, spec.proj_hidden, spec.proj_dim, &mut init);
        let predictor = Mlp::linear(spec.proj_dim, spec.proj_dim, &mut init);
        let target_encoder = online_encoder.clone();
        let target_projector = online_projector.clone();
        let sem_target = spec.sem.with_tau(spec.tau_target.unwrap_or_else(|| spec.sem.tau()))?;
        Ok(ByolState {
            online_encoder,
            online_projector,
            predictor,
            target_encoder,
            target_projector,
            sem_online: spec.sem,
            sem_target,
            ema_rate: spec.ema_rate,
            step: 0,
        })
    }

    /// Target projection of a batch, computed entirely without a tape.
    /// Training mode: the target maintains its own running statistics.
    pub fn target_project(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let z = self.target_encoder.forward_train(x)?;
        let s = sem::forward(&z, &self.sem_target)?;
        self.target_projector.forward_train(&s)
    }

    /// EMA blend of target parameters toward the online parameters.
    pub fn ema_update(&mut self) -> Result<()> {
        self.target_encoder.blend_from(&self.online_encoder, self.ema_rate)?;
        self.target_projector.blend_from(&self.online_projector, self.ema_rate)
    }

    /// One optimization step on a pair of views. Returns the symmetric loss
    /// (mean over both view assignments) before the update.
    pub fn train_step(&mut self, x1: &Tensor<S>, x2: &Tensor<S>, lr: S, wd: S) -> Result<S> {
        let mut tape = Tape::new();
        let enc_vars = self.online_encoder.watch(&mut tape);
        let proj_vars = self.online_projector.watch(&mut tape);
        let pred_vars = self.predictor.watch(&mut tape);

        // Target views first, so both branches see the same batch.
        let t1 = self.target_project(x1)?;
        let t2 = self.target_project(x2)?;

        let online = |tape: &mut Tape<S>, x: &Tensor<S>, state: &mut Self| -> Result<_> {
            let xv = tape.leaf(x);
            let z = state.online_encoder.forward_tape(tape, &enc_vars, xv, true)?;
            let s = sem::forward_tape(tape, z, &state.sem_online)?;
            let p = state.online_projector.forward_tape(tape, &proj_vars, s, true)?;
            state.predictor.forward_tape(tape, &pred_vars, p, true)
        };
        let q1 = online(&mut tape, x1, self)?;
        let q2 = online(&mut tape, x2, self)?;

        let t2_leaf = tape.leaf(&t2);
        let t1_leaf = tape.leaf(&t1);
        let la = byol_loss_tape(&mut tape, q1, t2_leaf)?;
        let lb = byol_loss_tape(&mut tape, q2, t1_leaf)?;
        let sum = tape.add(la, lb)?;
        let loss = tape.affine(sum, S::of(0.5), S::zero())?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::training(self.step, "non-finite loss"));
        }

        tape.backward(loss)?;
        self.online_encoder.sgd_step(&tape, &enc_vars, lr, wd)?;
        self.online_projector.sgd_step(&tape, &proj_vars, lr, wd)?;
        self.predictor.sgd_step(&tape, &pred_vars, lr, wd)?;
        self.ema_update()?;
        self.step += 1;
        Ok(value)
    }
}

/// A finished run: final state, per-step losses, and the final positions of
/// the consumed random streams (for checkpointing).
#[derive(Clone, Debug)]
pub struct ByolRun<S: Scalar = f64> {
    pub state: ByolState<S>,
    pub losses: Vec<S>,
    pub data_pos: (u64, u64),
    pub augment_pos: (u64, u64),
}

/// Trains a fresh state; see [`train_byol_from`].
pub fn train_byol<S: Scalar>(
    dataset: &DatasetHandle<S>,
    spec: &ByolSpec<S>,
    cfg: &TrainConfig<S>,
) -> Result<ByolRun<S>> {
    let state = ByolState::new(spec, cfg.seed)?;
    train_byol_from(state, dataset, cfg)
}

/// Trains an existing state for the configured number of steps.
///
/// Per step: draw a batch, make two views, run both branches, apply SGD to
/// the online networks, EMA-blend the target. The loss trajectory has one
/// entry per step, each computed before that step's update.
pub fn train_byol_from<S: Scalar>(
    mut state: ByolState<S>,
    dataset: &DatasetHandle<S>,
    cfg: &TrainConfig<S>,
) -> Result<ByolRun<S>> {
    cfg.validate()?;
    dataset.validate()?;
    if dataset.n() == 0 {
        return Err(Error::empty("training needs a nonempty dataset"));
    }
    if dataset.dim() != state.online_encoder.in_dim() {
        return Err(Error::shape("train", "dataset width must match encoder input"));
    }
    let total = cfg.total_steps(dataset.n())?;
    let mut data_rng = named_stream(cfg.seed, rng::DATA);
    let mut aug_rng = named_stream(cfg.seed, rng::AUGMENT);
    let mut plan = BatchPlan::new(dataset.n(), cfg.batch_size);
    let mut losses = Vec::with_capacity(total);
    for step in 0..total {
        let idx = plan.next(&mut data_rng);
        let (x1, x2) = make_views(dataset, &idx, &cfg.augment, &mut aug_rng)?;
        let lr = if cfg.cosine_decay {
            cosine_lr(step, total, cfg.base_lr)?
        } else {
            cfg.base_lr
        };
        let loss = state.train_step(&x1, &x2, lr, cfg.weight_decay)?;
        losses.push(loss);
    }
    Ok(ByolRun {
        state,
        losses,
        data_pos: word_pos_parts(&data_rng),
        augment_pos: word_pos_parts(&aug_rng),
    })
}

// ---------------------------------------------------------------------------
