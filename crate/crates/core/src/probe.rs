//! Linear evaluation on frozen representations.
//!
//! Features come from the encoder's evaluation-mode forward, either raw
//! (base mode) or pushed through the simplex layer at a probe temperature
//! (sem mode). A linear classifier is fit by full-batch gradient descent on
//! softmax cross-entropy with weight decay; the sweep compares base features
//! against a grid of temperatures on a held-out split.

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::rng::{self, named_stream, uniform};
use crate::scalar::Scalar;
use crate::sem::{self, csv_err, SemConfig};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Which feature space the probe sees.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum FeatureMode<S: Scalar = f64> {
    /// Raw encoder output.
    Base,
    /// Simplex-normalized output at the carried temperature.
    Sem(SemConfig<S>),
}

impl<S: Scalar> FeatureMode<S> {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureMode::Base => "base",
            FeatureMode::Sem(_) => "sem",
        }
    }
}

/// Probe training hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProbeConfig<S: Scalar = f64> {
    /// Temperatures to sweep, all positive.
    pub tau_sweep: Vec<S>,
    pub include_base: bool,
    /// Full-batch gradient steps.
    pub epochs: usize,
    pub lr: S,
    pub weight_decay: S,
    pub seed: u64,
}

impl<S: Scalar> Default for ProbeConfig<S> {
    fn default() -> Self {
        ProbeConfig {
            tau_sweep: vec![S::of(0.01), S::of(0.1), S::of(1.0), S::of(10.0)],
            include_base: true,
            epochs: 200,
            lr: S::of(0.1),
            weight_decay: S::of(1e-4),
            seed: 0,
        }
    }
}

impl<S: Scalar> ProbeConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.tau_sweep.iter().any(|t| !(t.is_finite() && *t > S::zero())) {
            return Err(Error::param("every sweep temperature must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > S::zero()) {
            return Err(Error::param("probe learning rate must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= S::zero()) {
            return Err(Error::param("probe weight decay must be nonnegative"));
        }
        Ok(())
    }
}

/// A fitted linear classifier: `logits = x W + b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearProbe<S: Scalar = f64> {
    /// `[n_features, n_classes]`.
    pub w: Tensor<S>,
    /// `[n_classes]`.
    pub b: Tensor<S>,
    pub initial_loss: S,
    pub final_loss: S,
    pub epochs_trained: usize,
}

impl<S: Scalar> LinearProbe<S> {
    pub fn n_features(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn n_classes(&self) -> usize {
        self.w.shape()[1]
    }
}

const EXTRACT_CHUNK: usize = 512;

/// Frozen-encoder features for a whole dataset, shape `[n, F]`.
///
/// Evaluation-mode forwards only: running statistics, no tape, no state
/// mutation, so the encoder is bit-identical before and after.
pub fn extract_features<S: Scalar>(
    encoder: &Mlp<S>,
    ds: &DatasetHandle<S>,
    mode: &FeatureMode<S>,
) -> Result<Tensor<S>> {
    if ds.n() == 0 {
        return Err(Error::empty("feature extraction needs a nonempty dataset"));
    }
    if ds.dim() != encoder.in_dim() {
        return Err(Error::shape("extract", "dataset width must match encoder input"));
    }
    if let FeatureMode::Sem(cfg) = mode {
        if cfg.dim() != encoder.out_dim() {
            return Err(Error::shape("extract", "simplex width must match encoder output"));
        }
    }
    let mut buf = Vec::with_capacity(ds.n() * encoder.out_dim());
    let idx: Vec<usize> = (0..ds.n()).collect();
    for chunk in idx.chunks(EXTRACT_CHUNK) {
        let x = ds.gather(chunk)?;
        let z = encoder.forward_eval(&x)?;
        let f = match mode {
            FeatureMode::Base => z,
            FeatureMode::Sem(cfg) => sem::forward(&z, cfg)?,
        };
        buf.extend_from_slice(f.data());
    }
    Tensor::new([ds.n(), encoder.out_dim()], buf)
}

/// Fits a probe by full-batch gradient descent on softmax cross-entropy.
pub fn train_probe<S: Scalar>(
    features: &Tensor<S>,
    labels: &[usize],
    n_classes: usize,
    cfg: &ProbeConfig<S>,
) -> Result<LinearProbe<S>> {
    cfg.validate()?;
    let (n, f) = features.dims2()?;
    if labels.len() != n {
        return Err(Error::shape("train_probe", "label count must match feature rows"));
    }
    if labels.iter().any(|&y| y >= n_classes) {
        return Err(Error::param("label outside [0, n_classes)"));
    }
    let mut seen = vec![false; n_classes];
    for &y in labels {
        seen[y] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::param("probe training needs at least 2 classes present"));
    }

    let mut init = named_stream(cfg.seed, rng::PROBE_INIT);
    let bound = S::of(1.0 / (f as f64).sqrt());
    let w_data: Vec<S> = (0..f * n_classes).map(|_| uniform(&mut init, -bound, bound)).collect();
    let b_data: Vec<S> = (0..n_classes).map(|_| uniform(&mut init, -bound, bound)).collect();
    let mut w = Tensor::new([f, n_classes], w_data)?;
    let mut b = Tensor::new([n_classes], b_data)?;

    let mut initial_loss = None;
    let mut final_loss = S::zero();
    let epochs = cfg.epochs;
    for _ in 0..epochs.max(1) {
        let mut tape = Tape::new();
        let wv = tape.leaf(&w);
        let bv = tape.leaf(&b);
        let xv = tape.leaf(features);
        let logits = tape.matmul(xv, wv)?;
        let logits = tape.add_bias(logits, bv)?;
        let loss = tape.cross_entropy_mean(logits, labels)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::training(0, "non-finite probe loss"));
        }
        if initial_loss.is_none() {
            initial_loss = Some(value);
        }
        final_loss = value;
        if epochs == 0 {
            break;
        }
        tape.backward(loss)?;
        let gw = tape.grad(wv);
        for (i, p) in w.data_mut().iter_mut().enumerate() {
            let g = gw.map_or(S::zero(), |gs| gs[i]);
            *p = *p - cfg.lr * (g + cfg.weight_decay * *p);
        }
        let gb = tape.grad(bv);
        for (i, p) in b.data_mut().iter_mut().enumerate() {
            let g = gb.map_or(S::zero(), |gs| gs[i]);
            *p = *p - cfg.lr * (g + cfg.weight_decay * *p);
        }
    }
    let initial_loss = initial_loss.expect("at least one loss evaluation");
    Ok(LinearProbe { w, b, initial_loss, final_loss, epochs_trained: epochs })
}

/// Argmax predictions, ties broken by the lowest class index.
pub fn predict<S: Scalar>(probe: &LinearProbe<S>, features: &Tensor<S>) -> Result<Vec<usize>> {
    let (n, f) = features.dims2()?;
    if f != probe.n_features() {
        return Err(Error::shape("predict", "feature width must match probe"));
    }
    let c = probe.n_classes();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = features.row(i)?;
        let mut best = 0usize;
        let mut best_score = S::neg_infinity();
        for j in 0..c {
            let mut score = probe.b.data()[j];
            for (k, &x) in row.iter().enumerate() {
                score = score + x * probe.w.data()[k * c + j];
            }
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Fraction of argmax-correct predictions.
pub fn evaluate<S: Scalar>(
    probe: &LinearProbe<S>,
    features: &Tensor<S>,
    labels: &[usize],
) -> Result<S> {
    let (n, _) = features.dims2()?;
    if n == 0 || labels.is_empty() {
        return Err(Error::empty("evaluation needs a nonempty set"));
    }
    if labels.len() != n {
        return Err(Error::shape("evaluate", "label count must match feature rows"));
    }
    let preds = predict(probe, features)?;
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(S::of(correct as f64 / n as f64))
}

/// One sweep measurement.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepRow<S: Scalar = f64> {
    pub mode: String,
    /// Probe temperature; `None` for the base row.
    pub tau: Option<S>,
    pub split: String,
    pub accuracy: S,
    pub seed: u64,
}

/// Trains one probe per mode (base plus each sweep temperature) on the
/// train split and scores it on the validation split.
pub fn tau_sweep<S: Scalar>(
    encoder: &Mlp<S>,
    sem_shape: &SemConfig<S>,
    train: &DatasetHandle<S>,
    val: &DatasetHandle<S>,
    cfg: &ProbeConfig<S>,
) -> Result<Vec<SweepRow<S>>> {
    cfg.validate()?;
    if train.n_classes != val.n_classes {
        return Err(Error::data("train and validation splits disagree on classes"));
    }
    let mut modes = Vec::new();
    if cfg.include_base {
        modes.push(FeatureMode::Base);
    }
    for &tau in &cfg.tau_sweep {
        modes.push(FeatureMode::Sem(sem_shape.with_tau(tau)?));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for mode in &modes {
        let train_f = extract_features(encoder, train, mode)?;
        let val_f = extract_features(encoder, val, mode)?;
        let probe = train_probe(&train_f, &train.labels, train.n_classes, cfg)?;
        let accuracy = evaluate(&probe, &val_f, &val.labels)?;
        rows.push(SweepRow {
            mode: mode.label().to_string(),
            tau: match mode {
                FeatureMode::Base => None,
                FeatureMode::Sem(c) => Some(c.tau()),
            },
            split: "val".to_string(),
            accuracy,
            seed: cfg.seed,
        });
    }
    Ok(rows)
}

/// Sweep table as CSV: mode, tau, split, accuracy, seed.
pub fn write_sweep_csv<S: Scalar, W: IoWrite>(rows: &[SweepRow<S>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["mode", "tau", "split", "accuracy", "seed"]).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.mode.clone(),
            r.tau.map_or(String::new(), |t| format!("{t}")),
            r.split.clone(),
            format!("{}", r.accuracy),
            format!("{}", r.seed),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Probe weights as CSV: one row per feature, one column per class, with a
/// header of class names.
pub fn write_weights_csv<S: Scalar, W: IoWrite>(
    probe: &LinearProbe<S>,
    class_names: &[String],
    w: W,
) -> Result<()> {
    if class_names.len() != probe.n_classes() {
        return Err(Error::shape("weights_csv", "class name count must match columns"));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(class_names).map_err(csv_err)?;
    let c = probe.n_classes();
    for i in 0..probe.n_features() {
        let row: Vec<String> =
            (0..c).map(|j| format!("{}", probe.w.data()[i * c + j])).collect();
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a weights CSV back as (class names, `[n_features, n_classes]`).
pub fn read_weights_csv<S: Scalar>(text: &str) -> Result<(Vec<String>, Tensor<S>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::format("weights csv has no header"));
    }
    let c = names.len();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != c {
            return Err(Error::format(format!(
                "weights csv row has {} fields, expected {c}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(format!("bad float in weights csv: {field:?}")))?;
            data.push(S::of(v));
        }
    }
    if data.is_empty() {
        return Err(Error::format("weights csv has no data rows"));
    }
    let n = data.len() / c;
    Ok((names, Tensor::new([n, c], data)?))
}

// ---------------------------------------------------------------------------
