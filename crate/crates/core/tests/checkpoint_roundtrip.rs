//! Checkpoint files round-trip trained state bit-exactly, for both trainer
//! families, through real files.

mod common;

use sem_core::checkpoint::{Checkpoint, ModelState};
use sem_core::data::synth_clusters;
use sem_core::nn::EncoderSpec;
use sem_core::sem::SemConfig;
use sem_core::ssl::{
    train_byol, train_nce, AugmentParams, ByolSpec, NceForm, NceSpec, TrainConfig,
};

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        base_lr: 0.05,
        weight_decay: 1e-4,
        epochs: 0,
        batch_size: 8,
        steps: Some(5),
        cosine_decay: true,
        seed,
        augment: AugmentParams { noise_std: 0.02, ..AugmentParams::default() },
    }
}

#[test]
fn byol_checkpoint_survives_a_file_roundtrip() {
    let ds = synth_clusters(3, 24, 6, 0.4, 1).unwrap();
    let spec = ByolSpec {
        encoder: EncoderSpec { input_dim: 6, hidden: vec![10], repr_dim: 8, batch_norm: true },
        sem: SemConfig::new(2, 4, 0.5).unwrap(),
        tau_target: None,
        proj_hidden: 8,
        proj_dim: 6,
        ema_rate: 0.98,
    };
    let run = train_byol(&ds, &spec, &cfg(42)).unwrap();
    let ck = Checkpoint::from_byol(&run);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("byol.ckpt.json");
    ck.save(&path).unwrap();
    let loaded: Checkpoint = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.step, run.state.step);
    assert_eq!(loaded.rng.len(), 2);
    assert_eq!(loaded.rng[0].name, "data");
    assert_eq!(loaded.rng[1].name, "augment");
    let ModelState::Byol(state) = &loaded.model else {
        panic!("wrong model family");
    };
    for (a, b) in state
        .online_encoder
        .params()
        .iter()
        .zip(run.state.online_encoder.params().iter())
    {
        assert_eq!(a.data(), b.data());
    }
    for (a, b) in state
        .target_projector
        .params()
        .iter()
        .zip(run.state.target_projector.params().iter())
    {
        assert_eq!(a.data(), b.data());
    }
    assert_eq!(state.predictor.params().len(), run.state.predictor.params().len());
}

#[test]
fn nce_checkpoint_preserves_the_queue_bitwise() {
    let ds = synth_clusters(3, 24, 6, 0.4, 2).unwrap();
    let spec = NceSpec {
        encoder: EncoderSpec { input_dim: 6, hidden: vec![10], repr_dim: 8, batch_norm: true },
        sem: SemConfig::new(2, 4, 0.5).unwrap(),
        ema_rate: 0.99,
        temperature: 0.4,
        queue_capacity: 30,
        form: NceForm::Standard,
    };
    let run = train_nce(&ds, &spec, &cfg(43)).unwrap();
    let ck = Checkpoint::from_nce(&run);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nce.ckpt.json");
    ck.save(&path).unwrap();
    let loaded: Checkpoint = Checkpoint::load(&path).unwrap();
    let ModelState::Nce(state) = &loaded.model else {
        panic!("wrong model family");
    };
    assert_eq!(state.queue.len(), run.state.queue.len());
    for (a, b) in state.queue.iter().zip(run.state.queue.iter()) {
        assert_eq!(a, b);
    }
    assert_eq!(state.step, run.state.step);
}
