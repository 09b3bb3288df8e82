//! Scalar abstraction: all core math is generic over the floating-point type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the crate (f32 or f64).
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; panics only for exotic scalar types.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 not representable in scalar type")
    }

    /// Conversion to `f64` for interop with RNG streams and serialization.
    fn to_f64_lossy(self) -> f64;

    fn of_usize(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize not representable in scalar type")
    }
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
