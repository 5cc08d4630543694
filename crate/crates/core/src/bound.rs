//! Numerical apparatus for the representation-distance bound.
//!
//! For representations constrained to `[-1, 1]^V` with a top-coordinate gap
//! of at least `Delta` (the region `Q_1`; by symmetry over coordinates one
//! region suffices), three quantities are computed:
//!
//! * `phi_base_exact`: the exact supremum of `n * sum ||q - q'||^2` over
//!   pairs in the region, which has the closed form `n * V * (2 - Delta)^2`.
//! * `phi_sem_mc`: a Monte Carlo lower estimate of the same supremum after
//!   the temperature softmax is applied to each point.
//! * `phi_sem_bound`: a closed-form upper bound on the softmax supremum,
//!   evaluated in log space so extreme temperatures neither overflow nor
//!   lose the exact zero at `Delta = 2`.
//!
//! The estimate can never exceed the bound; the scan shows the bound decays
//! to zero as the temperature does; and the gap check compares bound minus
//! base supremum against the negative threshold `(3n/4)(1 - V)`.

use std::io::Write as IoWrite;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::LinearProbe;
use crate::rng::{self, named_stream, uniform};
use crate::scalar::Scalar;
use crate::sem::csv_err;
use crate::tape::{log_sum_exp_values, softmax_blocks_values};
use crate::tensor::Tensor;

/// Fallback gap when none has been measured.
pub const DEFAULT_DELTA: f64 = 1e-3;
/// Default Monte Carlo pair count.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Inputs for a bound evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundConfig<S: Scalar = f64> {
    /// Sample count; every reported quantity scales linearly in it.
    pub n: usize,
    /// Simplex count, used only by the second-term report.
    pub l: usize,
    /// Simplex width, at least 2.
    pub v: usize,
    pub tau_grid: Vec<S>,
    /// Top-coordinate gap, in (0, 2].
    pub delta: S,
    pub mc_samples: usize,
    pub seed: u64,
    /// Optional Lipschitz constant of the loss-through-predictor map.
    pub r: Option<S>,
    /// Optional loss bound, carried through to reports.
    pub loss_bound: Option<S>,
    /// Optional confidence level, carried through to reports.
    pub delta_conf: Option<S>,
}

impl<S: Scalar> Default for BoundConfig<S> {
    fn default() -> Self {
        BoundConfig {
            n: 1,
            l: 1,
            v: 2,
            tau_grid: vec![S::of(0.01), S::of(0.1), S::of(1.0), S::of(10.0)],
            delta: S::of(DEFAULT_DELTA),
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            r: None,
            loss_bound: None,
            delta_conf: None,
        }
    }
}

impl<S: Scalar> BoundConfig<S> {
    pub fn validate(&self) -> Result<()> {
        check_region(self.n, self.v, self.delta)?;
        if self.l == 0 {
            return Err(Error::param("simplex count must be positive"));
        }
        if self.tau_grid.is_empty() {
            return Err(Error::param("temperature grid must be nonempty"));
        }
        if self.tau_grid.iter().any(|t| !(t.is_finite() && *t > S::zero())) {
            return Err(Error::param("every grid temperature must be positive"));
        }
        if self.mc_samples == 0 {
            return Err(Error::param("mc_samples must be at least 1"));
        }
        Ok(())
    }
}

fn check_region<S: Scalar>(n: usize, v: usize, delta: S) -> Result<()> {
    if n == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    if v < 2 {
        return Err(Error::param("width must be at least 2"));
    }
    if !delta.is_finite() || delta <= S::zero() {
        return Err(Error::param("gap must be positive"));
    }
    if delta > S::of(2.0) {
        return Err(Error::infeasible(format!(
            "gap {delta} exceeds the coordinate range width 2: the region is empty"
        )));
    }
    Ok(())
}

/// One point of `Q_1`: `q` in `[-1, 1]^V` with `q_0 >= q_j + Delta` for all
/// `j >= 1`. Each coordinate lands on an endpoint of its feasible interval
/// with probability 1/8 per endpoint, else uniformly inside it, so the
/// sampler reaches the extreme points that attain suprema.
pub fn sample_q1<S: Scalar>(v: usize, delta: S, rng: &mut impl Rng) -> Result<Vec<S>> {
    check_region(1, v, delta)?;
    let one = S::one();
    let mut draw = |lo: S, hi: S| -> S {
        let u: f64 = rng.gen();
        if u < 0.125 {
            lo
        } else if u < 0.25 {
            hi
        } else {
            uniform(rng, lo, hi)
        }
    };
    let mut q = Vec::with_capacity(v);
    let top = draw(delta - one, one);
    q.push(top);
    for _ in 1..v {
        q.push(draw(-one, top - delta));
    }
    Ok(q)
}

/// Exact supremum of `n * sum ||q - q'||^2` over pairs in the region:
/// every coordinate can swing the full `2 - Delta` simultaneously, so the
/// value is `n * V * (2 - Delta)^2`.
pub fn phi_base_exact<S: Scalar>(n: usize, v: usize, delta: S) -> Result<S> {
    check_region(n, v, delta)?;
    let swing = S::of(2.0) - delta;
    Ok(S::of(n as f64) * S::of(v as f64) * swing * swing)
}

/// Squared distance between the temperature-softmax images of two points.
pub fn sem_pair_dist_sq<S: Scalar>(q: &[S], q2: &[S], tau: S) -> Result<S> {
    if q.len() != q2.len() || q.is_empty() {
        return Err(Error::shape("pair_dist", "points must share a positive length"));
    }
    let a = softmax_blocks_values(q, q.len(), tau)?;
    let b = softmax_blocks_values(q2, q2.len(), tau)?;
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(&b) {
        let d = *x - *y;
        acc = acc + d * d;
    }
    Ok(acc)
}

/// Monte Carlo lower estimate of the softmax-space supremum at one
/// temperature: `n` times the max squared distance over sampled pairs.
///
/// The pair list always starts with the forced extreme pair (concentrated
/// point vs minimum-gap point); random pairs follow from a fresh `mc`
/// stream, so estimates at growing `mc_samples` are nested and the running
/// maximum is non-decreasing.
pub fn phi_sem_mc<S: Scalar>(cfg: &BoundConfig<S>, tau: S) -> Result<S> {
    cfg.validate()?;
    if !(tau.is_finite() && tau > S::zero()) {
        return Err(Error::param("temperature must be positive"));
    }
    let v = cfg.v;
    let one = S::one();
    let mut spread = vec![-one; v];
    spread[0] = one;
    let mut compact = vec![one - cfg.delta; v];
    compact[0] = one;
    let mut best = sem_pair_dist_sq(&spread, &compact, tau)?;
    let mut rng = named_stream(cfg.seed, rng::MC);
    for _ in 0..cfg.mc_samples {
        let q = sample_q1(v, cfg.delta, &mut rng)?;
        let q2 = sample_q1(v, cfg.delta, &mut rng)?;
        let d = sem_pair_dist_sq(&q, &q2, tau)?;
        if d > best {
            best = d;
        }
    }
    Ok(S::of(cfg.n as f64) * best)
}

/// Closed-form upper bound on the softmax-space supremum:
///
/// `n * [ |A - B|^2 + (V-1) |C - D|^2 ]` with
/// `A = 1/(1 + (V-1) e^{-2/tau})`, `B = 1/(1 + (V-1) e^{-Delta/tau})`,
/// `C = 1/(1 + e^{Delta/tau} (1 + (V-2) e^{-2/tau}))`,
/// `D = 1/(1 + e^{2/tau} (1 + (V-2) e^{-Delta/tau}))`.
///
/// Each reciprocal is evaluated as `exp(-logsumexp(...))` over identically
/// ordered exponent lists, so `Delta = 2` collapses each pair of terms to
/// bitwise-equal values and the bound to exactly zero.
pub fn phi_sem_bound<S: Scalar>(n: usize, v: usize, delta: S, tau: S) -> Result<S> {
    check_region(n, v, delta)?;
    if !(tau.is_finite() && tau > S::zero()) {
        return Err(Error::param("temperature must be positive"));
    }
    let zero = S::zero();
    let two = S::of(2.0);
    let ln_v1 = S::of((v - 1) as f64).ln();
    // ln 0 = -inf at V = 2 drops the three-term entries cleanly.
    let ln_v2 = S::of((v - 2) as f64).ln();
    let a = exp_neg_lse(&[zero, ln_v1 - two / tau]);
    let b = exp_neg_lse(&[zero, ln_v1 - delta / tau]);
    let c = exp_neg_lse(&[zero, delta / tau, ln_v2 + (delta - two) / tau]);
    let d = exp_neg_lse(&[zero, two / tau, ln_v2 + (two - delta) / tau]);
    let ab = a - b;
    let cd = c - d;
    Ok(S::of(n as f64) * (ab * ab + S::of((v - 1) as f64) * cd * cd))
}

fn exp_neg_lse<S: Scalar>(xs: &[S]) -> S {
    (-log_sum_exp_values(xs)).exp()
}

/// One row of the temperature-decay scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScanRow<S: Scalar = f64> {
    pub tau: S,
    pub phi_sem_bound: S,
}

/// Evaluates the closed-form bound along a temperature grid.
pub fn tau_decay_scan<S: Scalar>(
    n: usize,
    v: usize,
    delta: S,
    grid: &[S],
) -> Result<Vec<ScanRow<S>>> {
    if grid.is_empty() {
        return Err(Error::param("scan grid must be nonempty"));
    }
    grid.iter()
        .map(|&tau| Ok(ScanRow { tau, phi_sem_bound: phi_sem_bound(n, v, delta, tau)? }))
        .collect()
}

/// Scan table as CSV: tau, phi_sem_bound.
pub fn write_scan_csv<S: Scalar, W: IoWrite>(rows: &[ScanRow<S>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tau", "phi_sem_bound"]).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([format!("{}", r.tau), format!("{}", r.phi_sem_bound)])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Negative threshold `(3n/4)(1 - V)` that the bound-minus-base gap must
/// stay below.
pub fn gap_threshold<S: Scalar>(n: usize, v: usize) -> S {
    S::of(0.75 * n as f64) * (S::one() - S::of(v as f64))
}

/// Verdict of the gap check at one temperature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapStatus {
    Pass,
    Fail,
    /// The check's derivation needs a gap of at most 1; larger gaps are
    /// reported without a verdict.
    OutOfRegime,
}

impl GapStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GapStatus::Pass => "pass",
            GapStatus::Fail => "fail",
            GapStatus::OutOfRegime => "out_of_regime",
        }
    }
}

/// Gap-check outcome: `margin = threshold - (bound - base)`, nonnegative
/// on a pass.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GapCheck<S: Scalar = f64> {
    pub threshold: S,
    pub margin: S,
    pub status: GapStatus,
}

/// Checks `phi_sem_bound - phi_base_exact <= (3n/4)(1 - V)` at one
/// temperature. Gaps above 1 are out of the check's regime.
pub fn phi_gap_check<S: Scalar>(n: usize, v: usize, delta: S, tau: S) -> Result<GapCheck<S>> {
    let bound = phi_sem_bound(n, v, delta, tau)?;
    let base = phi_base_exact(n, v, delta)?;
    let threshold = gap_threshold(n, v);
    let margin = threshold - (bound - base);
    let status = if delta > S::one() {
        GapStatus::OutOfRegime
    } else if margin >= S::zero() {
        GapStatus::Pass
    } else {
        GapStatus::Fail
    };
    Ok(GapCheck { threshold, margin, status })
}

/// Empirical lower estimate of the Lipschitz constant of per-sample loss
/// through the probe: max over pairs of |loss(z) - loss(z')| / ||z - z'||.
/// Pairs with identical features are skipped; all-identical input is
/// degenerate.
pub fn estimate_lipschitz<S: Scalar>(
    probe: &LinearProbe<S>,
    za: &Tensor<S>,
    zb: &Tensor<S>,
    labels: &[usize],
) -> Result<S> {
    let (m, f) = za.dims2()?;
    let (mb, fb) = zb.dims2()?;
    if m != mb || f != fb || labels.len() != m {
        return Err(Error::shape("lipschitz", "pair sides and labels must align"));
    }
    if f != probe.n_features() {
        return Err(Error::shape("lipschitz", "feature width must match probe"));
    }
    let c = probe.n_classes();
    if labels.iter().any(|&y| y >= c) {
        return Err(Error::param("label outside the probe's classes"));
    }
    let mut best: Option<S> = None;
    for (i, &y) in labels.iter().enumerate() {
        let ra = za.row(i)?;
        let rb = zb.row(i)?;
        let mut dist_sq = S::zero();
        for (x, y) in ra.iter().zip(rb) {
            let d = *x - *y;
            dist_sq = dist_sq + d * d;
        }
        if dist_sq == S::zero() {
            continue;
        }
        let la = probe_ce_loss(probe, ra, y, c);
        let lb = probe_ce_loss(probe, rb, y, c);
        let ratio = (la - lb).abs() / dist_sq.sqrt();
        if best.map_or(true, |b| ratio > b) {
            best = Some(ratio);
        }
    }
    best.ok_or_else(|| Error::degenerate("every feature pair is identical"))
}

fn probe_ce_loss<S: Scalar>(probe: &LinearProbe<S>, z: &[S], y: usize, c: usize) -> S {
    let mut logits = probe.b.data().to_vec();
    for (k, &x) in z.iter().enumerate() {
        for (j, l) in logits.iter_mut().enumerate() {
            *l = *l + x * probe.w.data()[k * c + j];
        }
    }
    log_sum_exp_values(&logits) - logits[y]
}

/// One temperature's worth of report quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundRow<S: Scalar = f64> {
    pub tau: S,
    pub phi_base: S,
    pub phi_sem_mc: S,
    pub phi_sem_bound: S,
    /// `phi_sem_bound - phi_base`.
    pub gap: S,
    pub gap_threshold: S,
    pub gap_margin: S,
    pub gap_status: GapStatus,
    /// `R * sqrt(L * phi_sem_bound / n)` when R is provided.
    pub second_term: Option<S>,
}

/// Full evaluation over the configured temperature grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundReport<S: Scalar = f64> {
    pub n: usize,
    pub l: usize,
    pub v: usize,
    pub delta: S,
    pub mc_samples: usize,
    pub seed: u64,
    pub rows: Vec<BoundRow<S>>,
    /// The confidence term scales a symbolic universal constant; it is
    /// reported as the expression with the constant left unevaluated.
    pub confidence_term: Option<String>,
}

/// Computes every row of the report for `cfg`'s grid.
pub fn compute_report<S: Scalar>(cfg: &BoundConfig<S>) -> Result<BoundReport<S>> {
    cfg.validate()?;
    let phi_base = phi_base_exact(cfg.n, cfg.v, cfg.delta)?;
    let mut rows = Vec::with_capacity(cfg.tau_grid.len());
    for &tau in &cfg.tau_grid {
        let mc = phi_sem_mc(cfg, tau)?;
        let bound = phi_sem_bound(cfg.n, cfg.v, cfg.delta, tau)?;
        let check = phi_gap_check(cfg.n, cfg.v, cfg.delta, tau)?;
        let second_term = match cfg.r {
            Some(r) => {
                let inside = S::of(cfg.l as f64) * bound / S::of(cfg.n as f64);
                Some(r * inside.sqrt())
            }
            None => None,
        };
        rows.push(BoundRow {
            tau,
            phi_base,
            phi_sem_mc: mc,
            phi_sem_bound: bound,
            gap: bound - phi_base,
            gap_threshold: check.threshold,
            gap_margin: check.margin,
            gap_status: check.status,
            second_term,
        });
    }
    let confidence_term = cfg.delta_conf.map(|dc| {
        format!("c*sqrt(ln(2/{dc})/{n}) with c a universal constant", n = cfg.n)
    });
    Ok(BoundReport {
        n: cfg.n,
        l: cfg.l,
        v: cfg.v,
        delta: cfg.delta,
        mc_samples: cfg.mc_samples,
        seed: cfg.seed,
        rows,
        confidence_term,
    })
}

impl<S: Scalar> BoundReport<S> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("report serialization failed: {e}")))
    }

    /// Report as CSV: tau, V, Delta, n, phi_base, phi_sem_mc,
    /// phi_sem_bound, gap_threshold, gap_pass, second_term.
    pub fn write_csv<W: IoWrite>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "tau",
            "V",
            "Delta",
            "n",
            "phi_base",
            "phi_sem_mc",
            "phi_sem_bound",
            "gap_threshold",
            "gap_pass",
            "second_term",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            wtr.write_record([
                format!("{}", r.tau),
                format!("{}", self.v),
                format!("{}", self.delta),
                format!("{}", self.n),
                format!("{}", r.phi_base),
                format!("{}", r.phi_sem_mc),
                format!("{}", r.phi_sem_bound),
                format!("{}", r.gap_threshold),
                r.gap_status.as_str().to_string(),
                r.second_term.map_or(String::new(), |s| format!("{s}")),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
