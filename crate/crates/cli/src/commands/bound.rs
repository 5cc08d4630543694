//! `sem bound`: distortion suprema and their closed form, printed and saved.

use std::path::PathBuf;

use clap::Args;
use sem_core::bound::{compute_report, BoundConfig};
use sem_core::Result;

use crate::config::{FloatList, Resolver};

use super::{resolve_dir, write_file};

#[derive(Args)]
pub struct BoundArgs {
    /// Key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; relative names land under the output root.
    #[arg(long)]
    out: Option<String>,
    /// Sample count the bound is scaled by.
    #[arg(long)]
    n: Option<usize>,
    /// Simplex count.
    #[arg(long)]
    l: Option<usize>,
    /// Vertices per simplex.
    #[arg(long = "V")]
    v: Option<usize>,
    /// Top-coordinate gap.
    #[arg(long)]
    delta: Option<f64>,
    /// Temperatures to evaluate, comma separated.
    #[arg(long)]
    tau: Option<FloatList>,
    /// Monte Carlo sample count for the empirical supremum.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lipschitz constant of the downstream map.
    #[arg(long)]
    r: Option<f64>,
    /// Loss bound for the second-term report.
    #[arg(long)]
    loss_bound: Option<f64>,
    /// Confidence level for the second-term report.
    #[arg(long)]
    delta_conf: Option<f64>,
}

impl BoundArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let cfg = BoundConfig {
            n: r.pick("n", self.n, 1)?,
            l: r.pick("l", self.l, 1)?,
            v: r.pick("v", self.v, 2)?,
            tau_grid: r.pick("tau", self.tau.clone(), FloatList(vec![0.01, 0.1, 1.0, 10.0]))?.0,
            delta: r.pick("delta", self.delta, 0.001)?,
            mc_samples: r.pick("mc", self.mc, 100_000)?,
            seed: r.pick("seed", self.seed, 0)?,
            r: r.pick_opt("r", self.r)?,
            loss_bound: r.pick_opt("loss_bound", self.loss_bound)?,
            delta_conf: r.pick_opt("delta_conf", self.delta_conf)?,
        };
        let report = compute_report(&cfg)?;
        let json = report.to_json()?;
        println!("{json}");

        let out = r.pick("out", self.out.clone(), format!("bound-V{}", cfg.v))?;
        let dir = resolve_dir(&out);
        write_file(&dir, "config.txt", r.snapshot("sem bound").as_bytes())?;
        write_file(&dir, "report.json", format!("{json}\n").as_bytes())?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        write_file(&dir, "report.csv", &csv)?;
        Ok(())
    }
}
