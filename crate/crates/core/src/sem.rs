//! Softmax-simplex representation layer.
//!
//! An encoder output of width `L*V` is read as `L` contiguous blocks of `V`
//! logits; each block is pushed through a temperature softmax and the blocks
//! are concatenated back, so the representation is a product of `L` simplices
//! embedded in the same `L*V` ambient width. Entropy diagnostics summarize
//! how sharp the blocks are and a histogram over `[0, log V]` makes the
//! temperature's effect visible.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{softmax_blocks_values, Tape, Var};
use crate::tensor::Tensor;

/// Block layout and temperature of the simplex layer.
///
/// `l >= 1`, `v >= 2`, `tau > 0`. Online and target branches may carry
/// different temperatures; construct one config per branch (they share this
/// type and its default).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SemConfig<S: Scalar = f64> {
    l: usize,
    v: usize,
    tau: S,
}

impl<S: Scalar> SemConfig<S> {
    pub fn new(l: usize, v: usize, tau: S) -> Result<Self> {
        if l < 1 {
            return Err(Error::param("simplex count L must be at least 1"));
        }
        if v < 2 {
            return Err(Error::param("block size V must be at least 2"));
        }
        if !(tau.is_finite() && tau > S::zero()) {
            return Err(Error::param(format!("temperature must be positive and finite, got {tau}")));
        }
        Ok(SemConfig { l, v, tau })
    }

    /// Toy-scale default: 32 blocks of 8 at temperature 0.5.
    pub fn toy() -> Self {
        SemConfig { l: 32, v: 8, tau: S::of(0.5) }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn tau(&self) -> S {
        self.tau
    }

    /// Ambient representation width `L*V`.
    pub fn dim(&self) -> usize {
        self.l * self.v
    }

    /// Same layout at a different temperature.
    pub fn with_tau(&self, tau: S) -> Result<Self> {
        SemConfig::new(self.l, self.v, tau)
    }

    fn check_width(&self, shape: &[usize]) -> Result<(usize, usize)> {
        match shape {
            &[n, d] if d == self.dim() => Ok((n, d)),
            other => Err(Error::shape(
                "sem_forward",
                format!("expected [n, {}] for L={} V={}, got {other:?}", self.dim(), self.l, self.v),
            )),
        }
    }
}

/// Differentiable simplex map on a tape: block softmax at the config's
/// temperature over `[n, L*V]` logits.
pub fn forward_tape<S: Scalar>(tape: &mut Tape<S>, z: Var, cfg: &SemConfig<S>) -> Result<Var> {
    cfg.check_width(tape.value(z).shape())?;
    tape.softmax_blocks(z, cfg.v, cfg.tau)
}

/// Value-only simplex map for frozen-encoder paths.
pub fn forward<S: Scalar>(z: &Tensor<S>, cfg: &SemConfig<S>) -> Result<Tensor<S>> {
    cfg.check_width(z.shape())?;
    let data = softmax_blocks_values(z.data(), cfg.v, cfg.tau)?;
    Tensor::new(z.shape().to_vec(), data)
}

/// Shannon entropy of every block of an already-mapped representation.
///
/// Input is `[n, L*V]` of block simplices; output is `[n, L]` with entries in
/// `[0, log V]`. Uses the `0 * log 0 = 0` convention. Each block must be a
/// valid simplex: entries nonnegative and summing to one, both within 1e-6.
pub fn simplex_entropy<S: Scalar>(zbar: &Tensor<S>, cfg: &SemConfig<S>) -> Result<Tensor<S>> {
    let (n, _) = cfg.check_width(zbar.shape())?;
    let tol = S::of(1e-6);
    let mut out = Vec::with_capacity(n * cfg.l);
    for row in 0..n {
        let rowv = zbar.row(row)?;
        for blk in 0..cfg.l {
            let p = &rowv[blk * cfg.v..(blk + 1) * cfg.v];
            let sum: S = p.iter().copied().sum();
            if (sum - S::one()).abs() > tol {
                return Err(Error::contract(format!(
                    "block ({row}, {blk}) sums to {sum}, not a simplex"
                )));
            }
            if let Some(&bad) = p.iter().find(|&&v| v < -tol) {
                return Err(Error::contract(format!(
                    "block ({row}, {blk}) has negative mass {bad}"
                )));
            }
            let mut h = S::zero();
            for &pi in p {
                if pi > S::zero() {
                    h = h - pi * pi.ln();
                }
            }
            out.push(h);
        }
    }
    Tensor::new([n, cfg.l], out)
}

/// Entropy histogram and sharpness summary of a logit dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimplexStats<S: Scalar = f64> {
    /// Per-block entropies, row-major over (sample, block).
    pub entropies: Vec<S>,
    /// `bins + 1` uniform edges spanning `[0, log V]`.
    pub bin_edges: Vec<S>,
    /// Histogram counts; sums to `n * L`.
    pub counts: Vec<u64>,
    /// Minimum over all blocks of the top-2 logit gap.
    pub delta_hat: S,
}

/// Default histogram resolution.
pub const DEFAULT_BINS: usize = 50;

/// Maps a logit dataset `[n, L*V]` through the simplex layer and summarizes
/// block entropies into `bins` uniform bins on `[0, log V]`. The top edge is
/// inclusive, so maximum-entropy blocks land in the last bin.
pub fn entropy_histogram<S: Scalar>(
    logits: &Tensor<S>,
    cfg: &SemConfig<S>,
    bins: usize,
) -> Result<SimplexStats<S>> {
    let (n, _) = cfg.check_width(logits.shape())?;
    if n == 0 {
        return Err(Error::empty("entropy_histogram needs at least one row"));
    }
    if bins == 0 {
        return Err(Error::param("histogram needs at least one bin"));
    }
    let mapped = forward(logits, cfg)?;
    let ent = simplex_entropy(&mapped, cfg)?;
    let entropies = ent.data().to_vec();

    let log_v = S::of(cfg.v as f64).ln();
    let bins_s = S::of(bins as f64);
    let mut counts = vec![0u64; bins];
    for &h in &entropies {
        let frac = (h / log_v).max(S::zero()).min(S::one());
        let idx = (frac * bins_s).to_f64().unwrap_or(0.0).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let bin_edges = (0..=bins).map(|k| log_v * S::of(k as f64) / bins_s).collect();

    let mut delta_hat = S::infinity();
    for row in 0..n {
        let rowv = logits.row(row)?;
        for blk in 0..cfg.l {
            let b = &rowv[blk * cfg.v..(blk + 1) * cfg.v];
            let mut top = S::neg_infinity();
            let mut second = S::neg_infinity();
            for &x in b {
                if x > top {
                    second = top;
                    top = x;
                } else if x > second {
                    second = x;
                }
            }
            let gap = top - second;
            if gap < delta_hat {
                delta_hat = gap;
            }
        }
    }

    Ok(SimplexStats { entropies, bin_edges, counts, delta_hat })
}

impl<S: Scalar> SimplexStats<S> {
    /// Histogram rows as `bin_left, bin_right, count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_left", "bin_right", "count"]).map_err(csv_err)?;
        for (k, &c) in self.counts.iter().enumerate() {
            out.write_record(&[
                format!("{}", self.bin_edges[k]),
                format!("{}", self.bin_edges[k + 1]),
                format!("{c}"),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Median of the per-block entropies (mean of the middle pair for even
    /// counts).
    pub fn median_entropy(&self) -> S {
        let mut sorted = self.entropies.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("entropies are finite"));
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / S::of(2.0)
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}
