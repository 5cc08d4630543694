//! Shared helpers for the integration suites: seeded tensor construction
//! and a central-difference gradient checker.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use sem_core::relevance::{Component, Ranking};
use sem_core::rng::{named_stream, uniform};
use sem_core::tape::{Tape, Var};
use sem_core::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    named_stream(seed, "test")
}

pub fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Like [`rand_tensor`] but keeps every entry at least `margin` away from
/// zero, so kinked ops stay differentiable across the probe step.
pub fn rand_tensor_off_zero(shape: &[usize], margin: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = uniform(rng, -1.0, 1.0);
            if x >= 0.0 {
                x + margin
            } else {
                x - margin
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs())
}

/// Brute-force maximization of ||q - q'||^2 over the gap-constrained box.
///
/// Feasible vectors have a top coordinate t in [delta-1, 1] and all other
/// coordinates in [-1, t-delta]. For fixed tops (t, u) of the two vectors
/// the squared distance is maximized coordinate-wise: the top pair
/// contributes (t-u)^2 and each of the V-1 remaining coordinates can reach
/// (max(t,u)+1-delta)^2 by pushing one side to its ceiling and the other
/// to -1. Only the two tops need gridding.
pub fn phi_base_grid_oracle(v: usize, delta: f64, resolution: f64) -> f64 {
    let lo = delta - 1.0;
    let steps = ((1.0 - lo) / resolution).round() as usize;
    let mut best = 0.0f64;
    for i in 0..=steps {
        let t = lo + (1.0 - lo) * i as f64 / steps as f64;
        for j in 0..=steps {
            let u = lo + (1.0 - lo) * j as f64 / steps as f64;
            let tail = t.max(u) + 1.0 - delta;
            let d = (t - u) * (t - u) + (v - 1) as f64 * tail * tail;
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Checks reverse-mode gradients of `f` against central differences.
///
/// `f` must be a pure function of the leaves it is handed: it is replayed
/// on a fresh tape for every probe. Gradients for every input coordinate
/// must match the numeric estimate within [`FD_TOL`] relative error.
pub fn check_gradients<F>(inputs: &[Tensor], label: &str, f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |xs: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = xs.iter().map(|x| tape.leaf(x)).collect();
        let out = f(&mut tape, &leaves);
        tape.value(out).item().expect("checker output must be scalar")
    };

    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|x| tape.leaf(x)).collect();
    let out = f(&mut tape, &leaves);
    assert_eq!(tape.value(out).numel(), 1, "{label}: checker output must be scalar");
    tape.backward(out).expect("backward");

    for (i, input) in inputs.iter().enumerate() {
        let grad = tape
            .grad(leaves[i])
            .unwrap_or_else(|| panic!("{label}: input {i} received no gradient"))
            .to_vec();
        assert_eq!(grad.len(), input.data().len());
        for (j, &analytic) in grad.iter().enumerate() {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            let rel = relative_error(analytic, numeric);
            assert!(
                rel < FD_TOL,
                "{label}: input {i} coord {j}: analytic {analytic} vs numeric {numeric} (rel {rel:.3e})"
            );
        }
    }
}

/// Multiplies `[r, c]` by a fixed `[c, 1]` weight column so row gradients
/// differ, then sums to a scalar.
pub fn fold_matmul(tape: &mut Tape, v: Var) -> Var {
    let (_, c) = {
        let s = tape.value(v).shape();
        (s[0], s[1])
    };
    let col: Vec<f64> = (0..c).map(|j| 0.3 + 0.1 * j as f64).collect();
    let w = tape.leaf(&Tensor::new([c, 1], col).unwrap());
    let prod = tape.matmul(v, w).unwrap();
    tape.sum(prod).unwrap()
}

// --- naive reference ------------------------------------------------------

pub fn naive_top_k(w: &Tensor, k: usize, ranking: Ranking) -> Vec<(usize, usize, f64)> {
    let (n, c) = w.dims2().unwrap();
    let mut edges = Vec::new();
    for class in 0..c {
        let mut taken = vec![false; n];
        for _ in 0..k {
            let mut best: Option<usize> = None;
            for (f, &used) in taken.iter().enumerate() {
                if used {
                    continue;
                }
                let score = |i: usize| {
                    let v = w.data()[i * c + class];
                    match ranking {
                        Ranking::Signed => v,
                        Ranking::Absolute => v.abs(),
                    }
                };
                match best {
                    None => best = Some(f),
                    Some(b) if score(f) > score(b) => best = Some(f),
                    _ => {}
                }
            }
            let f = best.unwrap();
            taken[f] = true;
            edges.push((class, f, w.data()[f * c + class]));
        }
    }
    let mut degree = vec![0usize; n];
    for &(_, f, _) in &edges {
        degree[f] += 1;
    }
    let mut kept: Vec<(usize, usize, f64)> =
        edges.into_iter().filter(|&(_, f, _)| degree[f] >= 2).collect();
    kept.sort_by_key(|&(c, f, _)| (c, f));
    kept
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Components by union-find over a node numbering where classes come
/// first and features follow.
pub fn naive_components(edges: &[(usize, usize)], n_classes: usize, n_features: usize) -> Vec<Component> {
    let mut uf = UnionFind::new(n_classes + n_features);
    for &(c, f) in edges {
        uf.union(c, n_classes + f);
    }
    let mut groups: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for &(c, f) in edges {
        let root = uf.find(c);
        let entry = groups.entry(root).or_default();
        entry.0.insert(c);
        entry.1.insert(f);
    }
    let mut out: Vec<Component> = groups
        .into_values()
        .map(|(classes, features)| Component {
            label: *classes.iter().next().unwrap(),
            classes: classes.into_iter().collect(),
            features: features.into_iter().collect(),
        })
        .collect();
    out.sort_by_key(|c| c.label);
    out
}

/// Exhaustive pair enumeration of the per-class same-superclass fraction.
pub fn naive_relevance(
    edges: &[(usize, usize)],
    n_classes: usize,
    assignment: &[usize],
) -> f64 {
    let shares = |a: usize, b: usize| {
        edges.iter().any(|&(c1, f1)| {
            c1 == a && edges.iter().any(|&(c2, f2)| c2 == b && f1 == f2)
        })
    };
    let mut total = 0.0;
    for i in 0..n_classes {
        let nbrs: Vec<usize> = (0..n_classes).filter(|&j| j != i && shares(i, j)).collect();
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs.iter().filter(|&&j| assignment[j] == assignment[i]).count();
        total += same as f64 / nbrs.len() as f64;
    }
    total
}
