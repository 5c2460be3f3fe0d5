//! Scalar abstractions.
//!
//! Group arithmetic only needs a field ([`Field`]), so it also runs on exact
//! rationals. Anything that takes square roots or compares against a
//! tolerance needs [`Real`].

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num};

/// A field element: enough structure for the step-two group law.
pub trait Field: Num + Copy + Neg<Output = Self> + Debug + Send + Sync + 'static {
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl<T> Field for T where T: Num + Copy + Neg<Output = T> + Debug + Send + Sync + 'static {}

/// floating point: f32 or f64
pub trait Real: Field + Float + FromPrimitive {
    /// Lossy conversion from an f64 constant.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
