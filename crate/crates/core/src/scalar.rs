//! Scalar abstraction for the estimation stack.
//!
//! All estimators, transforms, and the simulator are generic over [`Float`],
//! so the same code runs in `f32` or `f64`. The crate root exports `f64`
//! aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used throughout the crate.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants and RNG draws.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Conversion from an observation count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("usize conversion")
    }
}

impl Float for f32 {}
impl Float for f64 {}
