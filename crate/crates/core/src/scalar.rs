//! Scalar abstraction: every geometric and numeric routine in this crate is
//! generic over a floating point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for lossy conversion from f64 constants.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}
