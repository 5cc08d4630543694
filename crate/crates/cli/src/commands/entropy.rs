//! `sem entropy-hist`: bin per-simplex entropies of a checkpoint encoder.

use std::path::PathBuf;

use clap::Args;
use sem_core::checkpoint::Checkpoint;
use sem_core::sem::entropy_histogram;
use sem_core::Result;

use crate::config::Resolver;

use super::{encoder_of, full_tensor, resolve_dir, write_file, DataArgs};

#[derive(Args)]
pub struct EntropyArgs {
    /// Key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; relative names land under the output root.
    #[arg(long)]
    out: Option<String>,
    /// Checkpoint JSON produced by train.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Histogram bin count over [0, log V].
    #[arg(long)]
    bins: Option<usize>,
    /// Simplex temperature; defaults to the checkpoint value.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    data: DataArgs,
}

impl EntropyArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let checkpoint_path: String = r.require("checkpoint", self.checkpoint.clone())?;
        let ck: Checkpoint = Checkpoint::load(&checkpoint_path)?;
        let (encoder, sem) = encoder_of(&ck);

        let bins = r.pick("bins", self.bins, 32)?;
        let tau = match r.pick_opt("tau", self.tau)? {
            Some(t) => t,
            None => {
                r.record("tau", sem.tau());
                sem.tau()
            }
        };
        let seed = r.pick("seed", self.seed, 0)?;
        let ds = self.data.load(&mut r, seed)?;

        let logits = encoder.forward_eval(&full_tensor(&ds)?)?;
        let stats = entropy_histogram(&logits, &sem.with_tau(tau)?, bins)?;

        let out = r.pick("out", self.out.clone(), format!("entropy-seed{seed}"))?;
        let dir = resolve_dir(&out);
        write_file(&dir, "config.txt", r.snapshot("sem entropy-hist").as_bytes())?;

        let mut csv = Vec::new();
        stats.write_csv(&mut csv)?;
        write_file(&dir, "entropy_hist.csv", &csv)?;

        let summary = serde_json::json!({
            "median_entropy": stats.median_entropy(),
            "delta_hat": stats.delta_hat,
        });
        write_file(&dir, "summary.json", format!("{:#}\n", summary).as_bytes())?;
        println!(
            "median entropy {} over {} simplexes into {}",
            stats.median_entropy(),
            stats.entropies.len(),
            dir.display()
        );
        Ok(())
    }
}
