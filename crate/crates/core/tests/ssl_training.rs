//! Trainer-level behavior: loss decrease on clustered data, stop-gradient
//! on the target branch, EMA endpoint semantics, trajectory determinism,
//! and the FIFO queue invariant.

mod common;

use sem_core::data::synth_clusters;
use sem_core::nn::EncoderSpec;
use sem_core::sem::SemConfig;
use sem_core::ssl::{
    train_byol, train_nce, AugmentParams, ByolSpec, ByolState, NceForm, NceSpec, TrainConfig,
};
use sem_core::tensor::Tensor;

fn toy_encoder() -> EncoderSpec {
    EncoderSpec { input_dim: 8, hidden: vec![16], repr_dim: 16, batch_norm: true }
}

fn byol_spec(tau: f64) -> ByolSpec {
    ByolSpec {
        encoder: toy_encoder(),
        sem: SemConfig::new(4, 4, tau).unwrap(),
        tau_target: None,
        proj_hidden: 16,
        proj_dim: 8,
        ema_rate: 0.99,
    }
}

fn nce_spec(tau: f64) -> NceSpec {
    NceSpec {
        encoder: toy_encoder(),
        sem: SemConfig::new(4, 4, tau).unwrap(),
        ema_rate: 0.99,
        temperature: 0.5,
        queue_capacity: 256,
        form: NceForm::Standard,
    }
}

fn train_cfg(seed: u64, steps: usize) -> TrainConfig {
    TrainConfig {
        base_lr: 0.05,
        weight_decay: 1e-4,
        epochs: 0,
        batch_size: 16,
        steps: Some(steps),
        cosine_decay: true,
        seed,
        augment: AugmentParams { noise_std: 0.05, ..AugmentParams::default() },
    }
}

fn window_mean(xs: &[f64], range: std::ops::Range<usize>) -> f64 {
    let w = &xs[range];
    w.iter().sum::<f64>() / w.len() as f64
}

#[test]
fn byol_smoothed_loss_decreases_over_200_steps() {
    let ds = synth_clusters(4, 64, 8, 0.3, 7).unwrap();
    let run = train_byol(&ds, &byol_spec(1.0), &train_cfg(7, 200)).unwrap();
    assert_eq!(run.losses.len(), 200);
    let head = window_mean(&run.losses, 0..50);
    let tail = window_mean(&run.losses, 150..200);
    assert!(
        tail < head,
        "smoothed loss did not decrease: head {head:.6} tail {tail:.6}"
    );
    for &l in &run.losses {
        assert!((0.0..=4.0).contains(&l));
    }
}

#[test]
fn nce_smoothed_loss_decreases_over_200_steps() {
    let ds = synth_clusters(4, 64, 8, 0.3, 7).unwrap();
    let run = train_nce(&ds, &nce_spec(1.0), &train_cfg(7, 200)).unwrap();
    assert_eq!(run.losses.len(), 200);
    // The first 16 steps fill the queue, so their losses are computed
    // against a smaller negative pool and are not comparable in magnitude.
    let head = window_mean(&run.losses, 20..70);
    let tail = window_mean(&run.losses, 150..200);
    assert!(
        tail < head,
        "smoothed loss did not decrease: head {head:.6} tail {tail:.6}"
    );
    for &l in &run.losses {
        assert!(l >= 0.0 && l.is_finite());
    }
}

#[test]
fn target_branch_receives_no_gradient() {
    // With the EMA rate pinned at 1 the target may only change if gradient
    // leaks into it; parameters must stay bit-identical across steps.
    let ds = synth_clusters(3, 32, 8, 0.4, 11).unwrap();
    let mut spec = byol_spec(0.7);
    spec.ema_rate = 1.0;
    let mut state = ByolState::new(&spec, 11).unwrap();
    let frozen_enc: Vec<Tensor> =
        state.target_encoder.params().iter().map(|p| (*p).clone()).collect();
    let frozen_proj: Vec<Tensor> =
        state.target_projector.params().iter().map(|p| (*p).clone()).collect();
    let x1 = ds.gather(&(0..16).collect::<Vec<_>>()).unwrap();
    let x2 = ds.gather(&(16..32).collect::<Vec<_>>()).unwrap();
    for _ in 0..3 {
        state.train_step(&x1, &x2, 0.05, 0.0).unwrap();
    }
    for (now, before) in state.target_encoder.params().iter().zip(&frozen_enc) {
        assert_eq!(now.data(), before.data());
    }
    for (now, before) in state.target_projector.params().iter().zip(&frozen_proj) {
        assert_eq!(now.data(), before.data());
    }
}

#[test]
fn ema_rate_zero_copies_the_online_network() {
    let ds = synth_clusters(3, 32, 8, 0.4, 13).unwrap();
    let mut spec = byol_spec(0.7);
    spec.ema_rate = 0.0;
    let mut state = ByolState::new(&spec, 13).unwrap();
    let x1 = ds.gather(&(0..16).collect::<Vec<_>>()).unwrap();
    let x2 = ds.gather(&(16..32).collect::<Vec<_>>()).unwrap();
    state.train_step(&x1, &x2, 0.05, 0.0).unwrap();
    for (t, o) in state
        .target_encoder
        .params()
        .iter()
        .zip(state.online_encoder.params().iter())
    {
        assert_eq!(t.data(), o.data());
    }
    for (t, o) in state
        .target_projector
        .params()
        .iter()
        .zip(state.online_projector.params().iter())
    {
        assert_eq!(t.data(), o.data());
    }
}

#[test]
fn identical_seeds_yield_identical_trajectories() {
    let ds = synth_clusters(4, 32, 8, 0.3, 5).unwrap();
    let cfg = train_cfg(21, 30);
    let a = train_byol(&ds, &byol_spec(1.0), &cfg).unwrap();
    let b = train_byol(&ds, &byol_spec(1.0), &cfg).unwrap();
    assert_eq!(a.losses, b.losses);
    for (pa, pb) in a
        .state
        .online_encoder
        .params()
        .iter()
        .zip(b.state.online_encoder.params().iter())
    {
        assert_eq!(pa.data(), pb.data());
    }
    let mut other = cfg.clone();
    other.seed = 22;
    let c = train_byol(&ds, &byol_spec(1.0), &other).unwrap();
    assert_ne!(a.losses, c.losses);
}

#[test]
fn queue_holds_the_most_recent_batches_fifo() {
    let ds = synth_clusters(2, 64, 8, 0.3, 9).unwrap();
    let mut spec = nce_spec(1.0);
    spec.queue_capacity = 40;
    let cfg = train_cfg(9, 5);
    let run = train_nce(&ds, &spec, &cfg).unwrap();
    // 5 steps x batch 16 = 80 enqueued into capacity 40.
    assert_eq!(run.state.queue.len(), 40);
    for key in &run.state.queue {
        assert_eq!(key.len(), 16);
        let sum: f64 = key.iter().sum();
        // Keys live in the concatenated-simplex space: 4 blocks of mass 1.
        assert!((sum - 4.0).abs() < 1e-9);
    }
}
