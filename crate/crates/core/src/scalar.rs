//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Element type of vectors, matrices and networks.
///
/// Implemented for `f32` and `f64`. Experiments and checkers run in `f64`;
/// `f32` is supported for the core forward/backward arithmetic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar values convert to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_round_trip_through_f64_is_exact() {
        let x = 0.1f32;
        assert_eq!(f32::cast(x.as_f64()), x);
    }
}
