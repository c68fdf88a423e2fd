//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used by the factorization, spatial and
/// similarity kernels: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for configuration constants.
    fn of(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order over scalars, NaN sorted last.
pub fn total_cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}
