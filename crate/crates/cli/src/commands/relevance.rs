//! `sem relevance`: class-feature graphs from probe weights.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use sem_core::probe::read_weights_csv;
use sem_core::relevance::{
    build_wk, default_k_grid, export_graph, Ranking, RelevanceSummary, SuperclassMap,
};
use sem_core::tensor::Tensor;
use sem_core::{Error, Result};

use crate::config::Resolver;

use super::probe::ProbeArtifact;
use super::{resolve_dir, write_file};

#[derive(Args)]
pub struct RelevanceArgs {
    /// Key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; relative names land under the output root.
    #[arg(long)]
    out: Option<String>,
    /// Weights CSV with one header of class names.
    #[arg(long)]
    weights: Option<String>,
    /// Probe JSON produced by the probe subcommand.
    #[arg(long)]
    probe: Option<String>,
    /// Two-column class,superclass text file; default pairs classes in order.
    #[arg(long)]
    superclass: Option<String>,
    /// Edges kept per class.
    #[arg(long)]
    k: Option<usize>,
    /// Evaluate K = 1..=10 instead of a single K.
    #[arg(long)]
    k_sweep: Option<bool>,
    /// Rank weights by magnitude instead of signed value.
    #[arg(long)]
    abs_weights: Option<bool>,
}

impl RelevanceArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let weights_path = r.pick_opt("weights", self.weights.clone())?;
        let probe_path = r.pick_opt("probe", self.probe.clone())?;
        let (class_names, w): (Vec<String>, Tensor) = match (&weights_path, &probe_path) {
            (Some(path), None) => read_weights_csv(&fs::read_to_string(path)?)?,
            (None, Some(path)) => {
                let artifact: ProbeArtifact = serde_json::from_str(&fs::read_to_string(path)?)
                    .map_err(|e| Error::format(format!("probe artifact: {e}")))?;
                (artifact.class_names, artifact.probe.w)
            }
            _ => {
                return Err(Error::param("pass exactly one of --weights or --probe"));
            }
        };
        let n_features = w.dims2()?.0;

        let map = match r.pick_opt("superclass", self.superclass.clone())? {
            Some(path) => SuperclassMap::parse_text(&fs::read_to_string(path)?, &class_names)?,
            None => SuperclassMap::consecutive_pairs(&class_names),
        };
        let k = r.pick("k", self.k, 2)?;
        let k_sweep = r.pick("k_sweep", self.k_sweep, false)?;
        let abs_weights = r.pick("abs_weights", self.abs_weights, false)?;
        let ranking = if abs_weights { Ranking::Absolute } else { Ranking::Signed };

        let ks: Vec<usize> = if k_sweep {
            default_k_grid().into_iter().filter(|&k| k <= n_features).collect()
        } else {
            vec![k]
        };
        if ks.is_empty() {
            return Err(Error::empty("no feasible K values for this weight matrix"));
        }

        let out = r.pick("out", self.out.clone(), "relevance".to_string())?;
        let dir = resolve_dir(&out);
        write_file(&dir, "config.txt", r.snapshot("sem relevance").as_bytes())?;

        let mut summaries = Vec::with_capacity(ks.len());
        for &k in &ks {
            let graph = build_wk(&w, k, ranking)?;
            let mut edges = Vec::new();
            export_graph(&graph, &class_names, &mut edges)?;
            write_file(&dir, &format!("edges_k{k}.txt"), &edges)?;
            summaries.push(RelevanceSummary::new(&graph, &map)?);
        }
        let json = if k_sweep {
            serde_json::to_string_pretty(&summaries)
        } else {
            serde_json::to_string_pretty(&summaries[0])
        }
        .map_err(|e| Error::format(format!("relevance summary: {e}")))?;
        write_file(&dir, "summary.json", format!("{json}\n").as_bytes())?;

        for (k, s) in ks.iter().zip(&summaries) {
            println!(
                "K={k}: {} edges, {} components, relevance {}",
                s.n_edges, s.n_components, s.relevance
            );
        }
        println!("wrote {}", dir.display());
        Ok(())
    }
}
