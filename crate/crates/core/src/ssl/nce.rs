//! Contrastive trainer: online encoder against a momentum encoder whose
//! simplex representations feed a fixed-capacity FIFO queue of negatives.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::nn::{EncoderSpec, Mlp};
use crate::rng::{self, named_stream, word_pos_parts};
use crate::scalar::Scalar;
use crate::sem::{self, SemConfig};
use crate::ssl::loss::{nce_loss_tape, NceForm};
use crate::ssl::schedule::cosine_lr;
use crate::ssl::{make_views, BatchPlan, TrainConfig};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Architecture of a contrastive run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NceSpec<S: Scalar = f64> {
    pub encoder: EncoderSpec,
    pub sem: SemConfig<S>,
    /// Momentum-encoder EMA rate.
    pub ema_rate: S,
    /// Score temperature t.
    pub temperature: S,
    pub queue_capacity: usize,
    pub form: NceForm,
}

impl<S: Scalar> NceSpec<S> {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.encoder.repr_dim != self.sem.dim() {
            return Err(Error::param(format!(
                "encoder width {} must equal simplex width {}",
                self.encoder.repr_dim,
                self.sem.dim()
            )));
        }
        if !(self.ema_rate >= S::zero() && self.ema_rate <= S::one()) {
            return Err(Error::param("ema rate must lie in [0, 1]"));
        }
        if !(self.temperature.is_finite() && self.temperature > S::zero()) {
            return Err(Error::param("nce temperature must be positive"));
        }
        if self.queue_capacity == 0 {
            return Err(Error::param("queue capacity must be positive"));
        }
        Ok(())
    }
}

/// Online and momentum encoders plus the negative queue.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NceState<S: Scalar = f64> {
    pub online_encoder: Mlp<S>,
    pub target_encoder: Mlp<S>,
    /// Most recent target representations, oldest at the front. Every entry
    /// has simplex width L*V.
    pub queue: VecDeque<Vec<S>>,
    pub queue_capacity: usize,
    pub temperature: S,
    pub sem: SemConfig<S>,
    pub ema_rate: S,
    pub form: NceForm,
    pub step: usize,
}

impl<S: Scalar> NceState<S> {
    pub fn new(spec: &NceSpec<S>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut init = named_stream(seed, rng::INIT);
        let online_encoder = Mlp::encoder(&spec.encoder, &mut init)?;
        let target_encoder = online_encoder.clone();
        Ok(NceState {
            online_encoder,
            target_encoder,
            queue: VecDeque::new(),
            queue_capacity: spec.queue_capacity,
            temperature: spec.temperature,
            sem: spec.sem,
            ema_rate: spec.ema_rate,
            form: spec.form,
            step: 0,
        })
    }

    /// Simplex representation from the momentum branch, without a tape.
    pub fn target_represent(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let z = self.target_encoder.forward_train(x)?;
        sem::forward(&z, &self.sem)
    }

    fn enqueue(&mut self, keys: &Tensor<S>) -> Result<()> {
        let (b, _) = keys.dims2()?;
        for i in 0..b {
            self.queue.push_back(keys.row(i)?.to_vec());
            if self.queue.len() > self.queue_capacity {
                self.queue.pop_front();
            }
        }
        Ok(())
    }

    fn queue_tensor(&self) -> Result<Tensor<S>> {
        let k = self.queue.len();
        if k == 0 {
            return Err(Error::param("negative queue is empty"));
        }
        let d = self.sem.dim();
        let mut buf = Vec::with_capacity(k * d);
        for entry in &self.queue {
            buf.extend_from_slice(entry);
        }
        Tensor::new([k, d], buf)
    }

    /// One optimization step on a pair of views. The current keys are
    /// enqueued first, then scored, so the queue is never empty and after k
    /// steps holds the min(k*B, capacity) most recent keys in FIFO order.
    pub fn train_step(&mut self, x1: &Tensor<S>, x2: &Tensor<S>, lr: S, wd: S) -> Result<S> {
        let mut tape = Tape::new();
        let enc_vars = self.online_encoder.watch(&mut tape);

        let keys = self.target_represent(x2)?;
        self.enqueue(&keys)?;
        let negatives = self.queue_tensor()?;

        let x1v = tape.leaf(x1);
        let z = self.online_encoder.forward_tape(&mut tape, &enc_vars, x1v, true)?;
        let anchors = sem::forward_tape(&mut tape, z, &self.sem)?;
        let positives = tape.leaf(&keys);
        let negatives = tape.leaf(&negatives);
        let loss = nce_loss_tape(
            &mut tape,
            anchors,
            positives,
            negatives,
            self.temperature,
            self.form,
        )?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::training(self.step, "non-finite loss"));
        }

        tape.backward(loss)?;
        self.online_encoder.sgd_step(&tape, &enc_vars, lr, wd)?;
        self.target_encoder.blend_from(&self.online_encoder, self.ema_rate)?;
        self.step += 1;
        Ok(value)
    }
}

/// A finished contrastive run; fields mirror the bootstrap run.
#[derive(Clone, Debug)]
pub struct NceRun<S: Scalar = f64> {
    pub state: NceState<S>,
    pub losses: Vec<S>,
    pub data_pos: (u64, u64),
    pub augment_pos: (u64, u64),
}

/// Trains a fresh state; see [`train_nce_from`].
pub fn train_nce<S: Scalar>(
    dataset: &DatasetHandle<S>,
    spec: &NceSpec<S>,
    cfg: &TrainConfig<S>,
) -> Result<NceRun<S>> {
    let state = NceState::new(spec, cfg.seed)?;
    train_nce_from(state, dataset, cfg)
}

/// Trains an existing state for the configured number of steps.
pub fn train_nce_from<S: Scalar>(
    mut state: NceState<S>,
    dataset: &DatasetHandle<S>,
    cfg: &TrainConfig<S>,
) -> Result<NceRun<S>> {
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
    Ok(NceRun {
        state,
        losses,
        data_pos: word_pos_parts(&data_rng),
        augment_pos: word_pos_parts(&aug_rng),
    })
}

// ---------------------------------------------------------------------------
