//! Subcommand definitions and shared run-directory plumbing.

mod bound;
mod entropy;
mod probe;
mod relevance;
mod sweep;
mod train;

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sem_core::checkpoint::{Checkpoint, ModelState};
use sem_core::data::{load_cifar_binary, synth_clusters, DatasetHandle};
use sem_core::nn::Mlp;
use sem_core::sem::SemConfig;
use sem_core::tensor::Tensor;
use sem_core::{Error, Result};

use crate::config::{ConfigFile, Resolver};

#[derive(Parser)]
#[command(
    name = "sem",
    about = "Simplex-representation experiments: training, probing, bound checks, relevance graphs",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Train a self-distillation or contrastive model on vectors or images.
    Train(train::TrainArgs),
    /// Fit one linear probe on a frozen checkpoint encoder.
    Probe(probe::ProbeArgs),
    /// Probe the same encoder across a temperature sweep.
    Sweep(sweep::SweepArgs),
    /// Histogram per-simplex entropies of a checkpoint encoder.
    #[command(name = "entropy-hist")]
    EntropyHist(entropy::EntropyArgs),
    /// Evaluate the distortion quantities and their closed-form bound.
    Bound(bound::BoundArgs),
    /// Build the class-feature relevance graph from probe weights.
    Relevance(relevance::RelevanceArgs),
}

impl Command {
    pub fn execute(&self) -> Result<()> {
        match self {
            Command::Train(args) => args.execute(),
            Command::Probe(args) => args.execute(),
            Command::Sweep(args) => args.execute(),
            Command::EntropyHist(args) => args.execute(),
            Command::Bound(args) => args.execute(),
            Command::Relevance(args) => args.execute(),
        }
    }
}

// --- shared plumbing --------------------------------------------------------

/// Root for relative run directories; `SEM_OUTPUT_ROOT` overrides `runs`.
fn output_root() -> PathBuf {
    env::var_os("SEM_OUTPUT_ROOT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Absolute names are taken as-is; relative names live under the root.
pub(crate) fn resolve_dir(name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        output_root().join(p)
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

pub(crate) fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::empty()),
    }
}

/// The full dataset as one `[n, dim]` tensor.
pub(crate) fn full_tensor(ds: &DatasetHandle) -> Result<Tensor> {
    let idx: Vec<usize> = (0..ds.n()).collect();
    ds.gather(&idx)
}

/// Online encoder and simplex layout carried by a checkpoint.
pub(crate) fn encoder_of(ck: &Checkpoint) -> (&Mlp, &SemConfig) {
    match &ck.model {
        ModelState::Byol(s) => (&s.online_encoder, &s.sem_online),
        ModelState::Nce(s) => (&s.online_encoder, &s.sem),
    }
}

/// Dataset source shared by the pipeline subcommands: either a CIFAR-style
/// binary file or seed-deterministic synthetic clusters.
#[derive(Args)]
pub struct DataArgs {
    /// CIFAR-style binary file (1 label byte + 3072 pixel bytes per record).
    #[arg(long)]
    cifar: Option<String>,
    /// Synthetic cluster count.
    #[arg(long)]
    classes: Option<usize>,
    /// Samples per synthetic cluster.
    #[arg(long)]
    per_class: Option<usize>,
    /// Synthetic input dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Synthetic within-cluster standard deviation.
    #[arg(long)]
    spread: Option<f64>,
}

impl DataArgs {
    /// Resolves the source and loads the dataset. Only the keys of the
    /// chosen source enter the snapshot.
    pub(crate) fn load(&self, r: &mut Resolver<'_>, seed: u64) -> Result<DatasetHandle> {
        if let Some(path) = r.pick_opt("cifar", self.cifar.clone())? {
            return load_cifar_binary(path);
        }
        let classes = r.pick("classes", self.classes, 6)?;
        let per_class = r.pick("per_class", self.per_class, 300)?;
        let dim = r.pick("dim", self.dim, 32)?;
        let spread = r.pick("spread", self.spread, 0.5)?;
        synth_clusters(classes, per_class, dim, spread, seed)
    }
}

/// Rejects unknown enumeration values with the accepted spellings.
pub(crate) fn expect_one_of(key: &str, value: &str, allowed: &[&str]) -> Result<()> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(Error::param(format!("{key} must be one of {allowed:?}, got {value:?}")))
    }
}
