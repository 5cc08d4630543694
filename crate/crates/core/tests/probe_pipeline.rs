//! Probe pipeline behavior: the frozen-encoder contract, chance-level
//! accuracy bands for untrained probes, sweep row structure, and replay
//! determinism.

mod common;

use common::test_rng;
use sem_core::data::synth_clusters;
use sem_core::nn::{EncoderSpec, Mlp};
use sem_core::probe::{
    evaluate, extract_features, predict, tau_sweep, train_probe, FeatureMode, ProbeConfig,
};
use sem_core::rng::uniform;
use sem_core::sem::{forward, SemConfig};
use sem_core::tensor::Tensor;

fn trained_free_encoder(seed: u64) -> Mlp {
    let spec = EncoderSpec { input_dim: 6, hidden: vec![12], repr_dim: 8, batch_norm: true };
    let mut rng = test_rng(seed);
    Mlp::encoder(&spec, &mut rng).unwrap()
}

fn probe_cfg(seed: u64) -> ProbeConfig {
    ProbeConfig { epochs: 120, seed, ..ProbeConfig::default() }
}

#[test]
fn encoder_is_bit_identical_across_a_sweep() {
    let ds = synth_clusters(4, 50, 6, 0.4, 3).unwrap();
    let (train, val) = ds.split_train_val(0.2, 3).unwrap();
    let encoder = trained_free_encoder(3);
    let before: Vec<Tensor> = encoder.params().iter().map(|p| (*p).clone()).collect();
    let sem = SemConfig::new(2, 4, 0.5).unwrap();
    let rows = tau_sweep(&encoder, &sem, &train, &val, &probe_cfg(3)).unwrap();
    assert_eq!(rows.len(), 1 + probe_cfg(3).tau_sweep.len());
    let after: Vec<&Tensor> = encoder.params();
    for (b, a) in before.iter().zip(after) {
        assert_eq!(b.data(), a.data());
    }
}

#[test]
fn untrained_probe_sits_at_chance_on_balanced_labels() {
    // 10 balanced classes, 1000 samples: a random probe must land inside
    // the binomial band around 0.1 for every seed.
    let mut rng = test_rng(17);
    let n = 1000;
    let dim = 12;
    let data: Vec<f64> = (0..n * dim).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
    let features = Tensor::new([n, dim], data).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    for seed in 0..20 {
        let cfg = ProbeConfig { epochs: 0, seed, ..ProbeConfig::default() };
        let probe = train_probe(&features, &labels, 10, &cfg).unwrap();
        let acc = evaluate(&probe, &features, &labels).unwrap();
        assert!(
            (0.05..=0.20).contains(&acc),
            "seed {seed}: accuracy {acc} outside the chance band"
        );
    }
}

#[test]
fn separable_data_reaches_full_training_accuracy() {
    let features = Tensor::new(
        [8, 2],
        vec![
            2.0, 0.1, 2.2, -0.3, 1.8, 0.2, 2.5, 0.0, -2.0, 0.1, -2.3, -0.2, -1.9, 0.3, -2.4, 0.1,
        ],
    )
    .unwrap();
    let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let probe = train_probe(&features, &labels, 2, &probe_cfg(1)).unwrap();
    assert_eq!(evaluate(&probe, &features, &labels).unwrap(), 1.0);
    assert!(probe.final_loss <= probe.initial_loss);
}

#[test]
fn sweep_rows_are_deterministic_and_duplicates_match() {
    let ds = synth_clusters(3, 40, 6, 0.4, 8).unwrap();
    let (train, val) = ds.split_train_val(0.25, 8).unwrap();
    let encoder = trained_free_encoder(8);
    let sem = SemConfig::new(2, 4, 0.5).unwrap();
    let cfg = ProbeConfig {
        tau_sweep: vec![0.5, 0.5, 2.0],
        epochs: 40,
        seed: 8,
        ..ProbeConfig::default()
    };
    let rows = tau_sweep(&encoder, &sem, &train, &val, &cfg).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].mode, "base");
    assert_eq!(rows[1].tau, Some(0.5));
    // Same tau, same seed: training is a pure replay.
    assert_eq!(rows[1].accuracy, rows[2].accuracy);
    let again = tau_sweep(&encoder, &sem, &train, &val, &cfg).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!(a.accuracy, b.accuracy);
    }
}

#[test]
fn probe_weights_replay_bit_identically() {
    let ds = synth_clusters(3, 30, 6, 0.4, 12).unwrap();
    let encoder = trained_free_encoder(12);
    let features = extract_features(&encoder, &ds, &FeatureMode::Base).unwrap();
    let a = train_probe(&features, &ds.labels, ds.n_classes, &probe_cfg(5)).unwrap();
    let b = train_probe(&features, &ds.labels, ds.n_classes, &probe_cfg(5)).unwrap();
    assert_eq!(a.w.data(), b.w.data());
    assert_eq!(a.b.data(), b.b.data());
}

#[test]
fn sem_features_compose_encoder_and_simplex() {
    let ds = synth_clusters(2, 10, 6, 0.3, 4).unwrap();
    let encoder = trained_free_encoder(4);
    let sem = SemConfig::new(2, 4, 0.7).unwrap();
    let via_mode = extract_features(&encoder, &ds, &FeatureMode::Sem(sem)).unwrap();
    let base = extract_features(&encoder, &ds, &FeatureMode::Base).unwrap();
    let direct = forward(&base, &sem).unwrap();
    assert_eq!(via_mode.data(), direct.data());
}

#[test]
fn evaluate_is_permutation_invariant() {
    let ds = synth_clusters(3, 20, 6, 0.4, 6).unwrap();
    let encoder = trained_free_encoder(6);
    let features = extract_features(&encoder, &ds, &FeatureMode::Base).unwrap();
    let probe = train_probe(&features, &ds.labels, ds.n_classes, &probe_cfg(2)).unwrap();
    let acc = evaluate(&probe, &features, &ds.labels).unwrap();

    let n = ds.n();
    let perm: Vec<usize> = (0..n).rev().collect();
    let shuffled = ds.subset(&perm);
    let sf = extract_features(&encoder, &shuffled, &FeatureMode::Base).unwrap();
    let acc_perm = evaluate(&probe, &sf, &shuffled.labels).unwrap();
    assert_eq!(acc, acc_perm);

    let preds = predict(&probe, &features).unwrap();
    assert_eq!(preds.len(), n);
}
