//! `sem sweep`: probe one encoder across a temperature grid.

use std::path::PathBuf;

use clap::Args;
use sem_core::checkpoint::Checkpoint;
use sem_core::probe::{tau_sweep, write_sweep_csv, ProbeConfig};
use sem_core::{Error, Result};

use crate::config::{FloatList, Resolver};

use super::{encoder_of, resolve_dir, write_file, DataArgs};

#[derive(Args)]
pub struct SweepArgs {
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
    /// Probe temperatures, comma separated.
    #[arg(long)]
    taus: Option<FloatList>,
    /// Also probe the raw encoder output.
    #[arg(long)]
    include_base: Option<bool>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[command(flatten)]
    data: DataArgs,
}

impl SweepArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let checkpoint_path: String = r.require("checkpoint", self.checkpoint.clone())?;
        let ck: Checkpoint = Checkpoint::load(&checkpoint_path)?;
        let (encoder, sem) = encoder_of(&ck);

        let seed = r.pick("seed", self.seed, 0)?;
        let val_frac = r.pick("val_frac", self.val_frac, 0.2)?;
        let taus = r.pick("taus", self.taus.clone(), FloatList(vec![0.01, 0.1, 1.0, 10.0]))?;
        let include_base = r.pick("include_base", self.include_base, true)?;
        let epochs = r.pick("epochs", self.epochs, 200)?;
        let lr = r.pick("lr", self.lr, 0.1)?;
        let weight_decay = r.pick("weight_decay", self.weight_decay, 1e-4)?;

        let ds = self.data.load(&mut r, seed)?;
        let (train, val) = ds.split_train_val(val_frac, seed)?;
        let cfg = ProbeConfig {
            tau_sweep: taus.0.clone(),
            include_base,
            epochs,
            lr,
            weight_decay,
            seed,
        };
        let rows = tau_sweep(encoder, sem, &train, &val, &cfg)?;

        let out = r.pick("out", self.out.clone(), format!("sweep-seed{seed}"))?;
        let dir = resolve_dir(&out);
        write_file(&dir, "config.txt", r.snapshot("sem sweep").as_bytes())?;

        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv)?;
        write_file(&dir, "sweep.csv", &csv)?;

        let best = rows
            .iter()
            .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
            .ok_or_else(|| Error::empty("sweep produced no rows"))?;
        let summary = serde_json::json!({
            "best_mode": best.mode,
            "best_tau": best.tau,
            "best_accuracy": best.accuracy,
        });
        write_file(&dir, "summary.json", format!("{:#}\n", summary).as_bytes())?;
        println!(
            "best {} accuracy {} into {}",
            best.mode,
            best.accuracy,
            dir.display()
        );
        Ok(())
    }
}
