//! Simplicial-embedding toolkit.
//!
//! The crate covers one vertical slice, end to end and deterministically:
//!
//! * a reverse-mode autodiff tape over dense f64/f32 tensors ([`tape`]),
//! * the softmax-simplex representation layer and its diagnostics ([`sem`]),
//! * toy self-supervised trainers (bootstrap and noise-contrastive) with an
//!   EMA target branch ([`ssl`]),
//! * frozen-feature linear probing with a temperature sweep ([`probe`]),
//! * closed-form and Monte Carlo certificates for the hypothesis-distance
//!   quantity phi that drives a representation generalization bound
//!   ([`bound`]),
//! * a semantic-relevance graph built from probe weight matrices
//!   ([`relevance`]).
//!
//! Determinism is a crate-wide invariant: one master seed fans out into named
//! random streams, reductions run in a fixed index order, and every exported
//! file serializes with stable field order, so identical configs reproduce
//! identical bytes.
//!
//! The numeric core is generic over [`Scalar`] (implemented for f32 and f64).
//! Concrete aliases at the crate root pin the two instantiations; all shipped
//! pipelines and stated tolerances use f64.

pub mod bound;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod nn;
pub mod probe;
pub mod relevance;
pub mod rng;
pub mod scalar;
pub mod sem;
pub mod ssl;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use sem::SemConfig;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Concrete instantiations of the numeric core.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape64 = tape::Tape<f64>;
pub type Tape32 = tape::Tape<f32>;
