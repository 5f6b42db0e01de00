//! Scalar abstraction for the numeric kernels.
//!
//! The air-quality, weather and statistics code is written against
//! [`Scalar`] so it can run in `f32` on constrained devices or `f64` in the
//! simulator. The crate root re-exports `f64` aliases for everyday use.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point type usable by the numeric kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_convert_in_both_widths() {
        assert_eq!(<f64 as Scalar>::lit(0.5), 0.5);
        assert_eq!(<f32 as Scalar>::lit(0.25), 0.25f32);
    }
}
