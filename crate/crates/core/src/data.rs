//! Dataset ingestion and synthesis.
//!
//! A [`DatasetHandle`] stores samples as one flat row-major buffer so empty
//! datasets are representable; batches materialize as tensors on demand.
//! Sources: CIFAR-style binary files (one label byte then 3072 pixel bytes
//! per record) and seed-deterministic Gaussian cluster synthesis.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, named_stream, shuffled_indices, standard_normal};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Spatial interpretation of each row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataKind {
    Vectors { dim: usize },
    Images { c: usize, h: usize, w: usize },
}

impl DataKind {
    pub fn dim(&self) -> usize {
        match *self {
            DataKind::Vectors { dim } => dim,
            DataKind::Images { c, h, w } => c * h * w,
        }
    }
}

/// An in-memory labeled dataset.
#[derive(Clone, Debug)]
pub struct DatasetHandle<S: Scalar = f64> {
    pub kind: DataKind,
    /// Row-major sample buffer, `n * kind.dim()` long.
    pub data: Vec<S>,
    /// One label per row, each in `[0, n_classes)`.
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Display names indexed by label.
    pub class_names: Vec<String>,
    /// Optional (class name, superclass name) rows.
    pub superclass: Option<Vec<(String, String)>>,
    /// Where the data came from: a file path or generator parameters.
    pub provenance: String,
}

impl<S: Scalar> DatasetHandle<S> {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn x(&self, i: usize) -> &[S] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::data("dataset rows must have positive width"));
        }
        if self.data.len() != self.labels.len() * d {
            return Err(Error::data("sample buffer length disagrees with label count"));
        }
        if self.labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::data("label outside [0, n_classes)"));
        }
        if self.class_names.len() != self.n_classes {
            return Err(Error::data("class name table length must equal n_classes"));
        }
        Ok(())
    }

    /// Copies the rows at `idx` into a `[len, dim]` tensor.
    pub fn gather(&self, idx: &[usize]) -> Result<Tensor<S>> {
        if idx.is_empty() {
            return Err(Error::empty("gather needs at least one index"));
        }
        let d = self.dim();
        let mut buf = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            if i >= self.n() {
                return Err(Error::data(format!("sample index {i} out of range")));
            }
            buf.extend_from_slice(self.x(i));
        }
        Tensor::new([idx.len(), d], buf)
    }

    /// Reindexed copy of the dataset; indices may repeat or reorder.
    pub fn subset(&self, idx: &[usize]) -> DatasetHandle<S> {
        let d = self.dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.x(i));
            labels.push(self.labels[i]);
        }
        DatasetHandle {
            kind: self.kind,
            data,
            labels,
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
            superclass: self.superclass.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Seed-deterministic split into (train, validation) parts.
    pub fn split_train_val(&self, val_frac: f64, seed: u64) -> Result<(Self, Self)> {
        if !(val_frac > 0.0 && val_frac < 1.0) {
            return Err(Error::param("validation fraction must lie in (0, 1)"));
        }
        let n = self.n();
        let n_val = ((n as f64) * val_frac).round() as usize;
        if n_val == 0 || n_val == n {
            return Err(Error::param(format!(
                "split of {n} samples at fraction {val_frac} leaves an empty part"
            )));
        }
        let mut rng = named_stream(seed, rng::DATA);
        let order = shuffled_indices(n, &mut rng);
        let (val_idx, train_idx) = order.split_at(n_val);
        Ok((self.subset(train_idx), self.subset(val_idx)))
    }
}

/// Default validation fraction when a dataset has no canonical split.
pub const DEFAULT_VAL_FRAC: f64 = 0.2;

const CIFAR_RECORD: usize = 3073;

/// Loads a CIFAR-style binary file: records of 1 label byte + 3072 pixel
/// bytes (3 channels of 32x32), pixels scaled to [0, 1].
pub fn load_cifar_binary<S: Scalar>(path: impl AsRef<Path>) -> Result<DatasetHandle<S>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::format(format!(
            "{} has {} bytes, not a multiple of the {CIFAR_RECORD}-byte record",
            path.display(),
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut data = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(CIFAR_RECORD) {
        labels.push(rec[0] as usize);
        for &px in &rec[1..] {
            data.push(S::of(px as f64 / 255.0));
        }
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let class_names = (0..n_classes).map(|c| format!("class_{c}")).collect();
    Ok(DatasetHandle {
        kind: DataKind::Images { c: 3, h: 32, w: 32 },
        data,
        labels,
        n_classes,
        class_names,
        superclass: None,
        provenance: path.display().to_string(),
    })
}

/// Gaussian clusters with seed-deterministic means: class means drawn from
/// N(0, I), samples at mean + spread * N(0, I). Classes are grouped into
/// superclasses by consecutive pairs.
pub fn synth_clusters<S: Scalar>(
    n_classes: usize,
    samples_per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<DatasetHandle<S>> {
    if n_classes == 0 || samples_per_class == 0 || dim == 0 {
        return Err(Error::param("synth_clusters counts must be positive"));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::param("spread must be finite and nonnegative"));
    }
    let mut rng = named_stream(seed, rng::SYNTH);
    let mut means = vec![S::zero(); n_classes * dim];
    for m in &mut means {
        *m = standard_normal(&mut rng);
    }
    let spread_s = S::of(spread);
    let mut data = Vec::with_capacity(n_classes * samples_per_class * dim);
    let mut labels = Vec::with_capacity(n_classes * samples_per_class);
    for class in 0..n_classes {
        let mean = &means[class * dim..(class + 1) * dim];
        for _ in 0..samples_per_class {
            for &m in mean {
                data.push(m + spread_s * standard_normal(&mut rng));
            }
            labels.push(class);
        }
    }
    let class_names: Vec<String> = (0..n_classes).map(|c| format!("class_{c}")).collect();
    let superclass = Some(
        (0..n_classes)
            .map(|c| (format!("class_{c}"), format!("super_{}", c / 2)))
            .collect(),
    );
    Ok(DatasetHandle {
        kind: DataKind::Vectors { dim },
        data,
        labels,
        n_classes,
        class_names,
        superclass,
        provenance: format!(
            "synth(classes={n_classes},per_class={samples_per_class},dim={dim},spread={spread},seed={seed})"
        ),
    })
}

// ---------------------------------------------------------------------------
