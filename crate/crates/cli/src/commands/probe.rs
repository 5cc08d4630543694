//! `sem probe`: fit one linear readout on a frozen checkpoint encoder.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use sem_core::checkpoint::Checkpoint;
use sem_core::probe::{
    evaluate, extract_features, train_probe, write_sweep_csv, write_weights_csv, FeatureMode,
    LinearProbe, ProbeConfig, SweepRow,
};
use sem_core::Result;

use crate::config::Resolver;

use super::{encoder_of, expect_one_of, resolve_dir, write_file, DataArgs};

/// Saved probe: weights plus the class order the columns refer to.
#[derive(Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub class_names: Vec<String>,
    pub probe: LinearProbe,
}

#[derive(Args)]
pub struct ProbeArgs {
    /// Key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; relative names land under the output root.
    #[arg(long)]
    out: Option<String>,
    /// Checkpoint JSON produced by train.
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of the data held out for scoring.
    #[arg(long)]
    val_frac: Option<f64>,
    /// Feature space: sem or base.
    #[arg(long)]
    mode: Option<String>,
    /// Probe temperature; defaults to the checkpoint value.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[command(flatten)]
    data: DataArgs,
}

impl ProbeArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let checkpoint_path: String = r.require("checkpoint", self.checkpoint.clone())?;
        let ck: Checkpoint = Checkpoint::load(&checkpoint_path)?;
        let (encoder, sem) = encoder_of(&ck);

        let seed = r.pick("seed", self.seed, 0)?;
        let val_frac = r.pick("val_frac", self.val_frac, 0.2)?;
        let mode = r.pick("mode", self.mode.clone(), "sem".to_string())?;
        expect_one_of("mode", &mode, &["sem", "base"])?;
        let tau = match r.pick_opt("tau", self.tau)? {
            Some(t) => t,
            None => {
                r.record("tau", sem.tau());
                sem.tau()
            }
        };
        let epochs = r.pick("epochs", self.epochs, 200)?;
        let lr = r.pick("lr", self.lr, 0.1)?;
        let weight_decay = r.pick("weight_decay", self.weight_decay, 1e-4)?;

        let ds = self.data.load(&mut r, seed)?;
        let (train, val) = ds.split_train_val(val_frac, seed)?;

        let feature_mode = match mode.as_str() {
            "base" => FeatureMode::Base,
            _ => FeatureMode::Sem(sem.with_tau(tau)?),
        };
        let cfg = ProbeConfig {
            tau_sweep: vec![],
            include_base: false,
            epochs,
            lr,
            weight_decay,
            seed,
        };
        let train_feats = extract_features(encoder, &train, &feature_mode)?;
        let val_feats = extract_features(encoder, &val, &feature_mode)?;
        let probe = train_probe(&train_feats, &train.labels, train.n_classes, &cfg)?;
        let accuracy = evaluate(&probe, &val_feats, &val.labels)?;

        let out = r.pick("out", self.out.clone(), format!("probe-{mode}-seed{seed}"))?;
        let dir = resolve_dir(&out);
        write_file(&dir, "config.txt", r.snapshot("sem probe").as_bytes())?;

        let row = SweepRow {
            mode: feature_mode.label().to_string(),
            tau: matches!(feature_mode, FeatureMode::Sem(_)).then_some(tau),
            split: "val".to_string(),
            accuracy,
            seed,
        };
        let mut csv = Vec::new();
        write_sweep_csv(&[row], &mut csv)?;
        write_file(&dir, "probe.csv", &csv)?;

        let mut weights = Vec::new();
        write_weights_csv(&probe, &ds.class_names, &mut weights)?;
        write_file(&dir, "weights.csv", &weights)?;

        let artifact = ProbeArtifact { class_names: ds.class_names.clone(), probe };
        let json = serde_json::to_string_pretty(&artifact)
            .map_err(|e| sem_core::Error::format(format!("probe artifact: {e}")))?;
        write_file(&dir, "probe.json", format!("{json}\n").as_bytes())?;

        println!("{mode} probe accuracy {accuracy} into {}", dir.display());
        Ok(())
    }
}
