//! Scalar abstraction for the numeric core.
//!
//! Kernels are written once against [`Scalar`] and instantiated at f64 in the
//! shipped pipelines; f32 exists for callers that trade precision for
//! footprint. Contract tolerances throughout the crate are stated for f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar the tensor and math kernels operate on.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an f64 literal into this scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite literals this crate passes in.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal converts to scalar")
    }

    /// Widens to f64 at reporting and serialization boundaries.
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
