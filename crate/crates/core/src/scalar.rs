use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar the geometry and statistics routines are generic over: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion from a count.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
