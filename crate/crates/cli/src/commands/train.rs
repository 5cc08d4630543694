//! `sem train`: fit a model on a dataset and persist the run directory.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use sem_core::checkpoint::Checkpoint;
use sem_core::nn::EncoderSpec;
use sem_core::sem::SemConfig;
use sem_core::ssl::{
    train_byol, train_nce, AugmentParams, ByolSpec, NceForm, NceSpec, TrainConfig,
};
use sem_core::Result;

use crate::config::{Resolver, UintList};

use super::{expect_one_of, resolve_dir, write_file, DataArgs};

#[derive(Args)]
pub struct TrainArgs {
    /// Key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; relative names land under the output root.
    #[arg(long)]
    out: Option<String>,
    /// Objective: byol or nce.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    data: DataArgs,
    /// Encoder hidden widths, comma separated.
    #[arg(long)]
    hidden: Option<UintList>,
    #[arg(long)]
    batch_norm: Option<bool>,
    /// Simplex count.
    #[arg(long)]
    l: Option<usize>,
    /// Vertices per simplex.
    #[arg(long)]
    v: Option<usize>,
    /// Online softmax temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Target-branch temperature (byol); defaults to the online value.
    #[arg(long)]
    tau_target: Option<f64>,
    /// Projector hidden width (byol).
    #[arg(long)]
    proj_hidden: Option<usize>,
    /// Projector output width (byol).
    #[arg(long)]
    proj_dim: Option<usize>,
    /// Target-network EMA rate.
    #[arg(long)]
    ema: Option<f64>,
    /// Score temperature (nce).
    #[arg(long)]
    temperature: Option<f64>,
    /// Negative queue capacity (nce).
    #[arg(long)]
    queue: Option<usize>,
    /// Contrastive form: standard or negatives-only.
    #[arg(long)]
    nce_form: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Step cap; 0 lets epochs drive the length.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    cosine: Option<bool>,
    /// Gaussian augmentation noise.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Brightness-shift augmentation range.
    #[arg(long)]
    brightness: Option<f64>,
    /// Contrast-scale augmentation range.
    #[arg(long)]
    contrast: Option<f64>,
}

impl TrainArgs {
    pub fn execute(&self) -> Result<()> {
        let file = super::load_config(&self.config)?;
        let mut r = Resolver::new(&file);

        let model = r.pick("model", self.model.clone(), "byol".to_string())?;
        expect_one_of("model", &model, &["byol", "nce"])?;
        let seed = r.pick("seed", self.seed, 0)?;
        let ds = self.data.load(&mut r, seed)?;

        let hidden = r.pick("hidden", self.hidden.clone(), UintList(vec![64]))?;
        let batch_norm = r.pick("batch_norm", self.batch_norm, true)?;
        let l = r.pick("l", self.l, 32)?;
        let v = r.pick("v", self.v, 8)?;
        let tau = r.pick("tau", self.tau, 1.0)?;
        let ema = r.pick("ema", self.ema, 0.99)?;
        let encoder = EncoderSpec {
            input_dim: ds.dim(),
            hidden: hidden.0.clone(),
            repr_dim: l * v,
            batch_norm,
        };
        let sem = SemConfig::new(l, v, tau)?;

        let lr = r.pick("lr", self.lr, 0.05)?;
        let weight_decay = r.pick("weight_decay", self.weight_decay, 1e-4)?;
        let epochs = r.pick("epochs", self.epochs, 0)?;
        let batch_size = r.pick("batch_size", self.batch_size, 64)?;
        let steps = r.pick("steps", self.steps, 500)?;
        let cosine = r.pick("cosine", self.cosine, true)?;
        let noise_std = r.pick("noise_std", self.noise_std, 0.05)?;
        let brightness = r.pick("brightness", self.brightness, 0.0)?;
        let contrast = r.pick("contrast", self.contrast, 0.0)?;
        let cfg = TrainConfig {
            base_lr: lr,
            weight_decay,
            epochs,
            batch_size,
            steps: if steps == 0 { None } else { Some(steps) },
            cosine_decay: cosine,
            seed,
            augment: AugmentParams { brightness, contrast, ..AugmentParams::noise(noise_std) },
        };

        let out = r.pick("out", self.out.clone(), format!("{model}-seed{seed}"))?;
        let dir = resolve_dir(&out);

        let (losses, checkpoint) = match model.as_str() {
            "byol" => {
                let tau_target = r.pick_opt("tau_target", self.tau_target)?;
                let proj_hidden = r.pick("proj_hidden", self.proj_hidden, 64)?;
                let proj_dim = r.pick("proj_dim", self.proj_dim, 32)?;
                let spec = ByolSpec {
                    encoder,
                    sem,
                    tau_target,
                    proj_hidden,
                    proj_dim,
                    ema_rate: ema,
                };
                let run = train_byol(&ds, &spec, &cfg)?;
                (run.losses.clone(), Checkpoint::from_byol(&run))
            }
            _ => {
                let temperature = r.pick("temperature", self.temperature, 0.5)?;
                let queue = r.pick("queue", self.queue, 256)?;
                let form = r.pick("nce_form", self.nce_form.clone(), "standard".to_string())?;
                expect_one_of("nce_form", &form, &["standard", "negatives-only"])?;
                let spec = NceSpec {
                    encoder,
                    sem,
                    ema_rate: ema,
                    temperature,
                    queue_capacity: queue,
                    form: match form.as_str() {
                        "standard" => NceForm::Standard,
                        _ => NceForm::NegativesOnly,
                    },
                };
                let run = train_nce(&ds, &spec, &cfg)?;
                (run.losses.clone(), Checkpoint::from_nce(&run))
            }
        };

        write_file(&dir, "config.txt", r.snapshot("sem train").as_bytes())?;
        let mut csv = String::from("step,loss\n");
        for (i, loss) in losses.iter().enumerate() {
            writeln!(csv, "{i},{loss}").expect("string write");
        }
        write_file(&dir, "losses.csv", csv.as_bytes())?;
        checkpoint.save(dir.join("checkpoint.json"))?;
        let summary = serde_json::json!({
            "model": model,
            "steps": losses.len(),
            "final_loss": losses.last().copied().unwrap_or(f64::NAN),
        });
        write_file(&dir, "summary.json", format!("{:#}\n", summary).as_bytes())?;
        println!("trained {model} for {} steps into {}", losses.len(), dir.display());
        Ok(())
    }
}
