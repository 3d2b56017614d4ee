//! Numeric abstraction for weights, counts and rates.
//!
//! Tables and weights are generic over [`Scalar`] so the same reduction can
//! run in `f64` for production output and in exact rationals when checking
//! identities such as "weights sum to the target population".

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Exact rational scalar used by verification routes.
pub type Exact = Ratio<i128>;

pub trait Scalar:
    Num + Copy + PartialOrd + AddAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self;

    /// Population figures arrive as `f64`; exact types must be able to
    /// represent them (integral populations always are).
    fn from_population(pop: f64) -> Option<Self>;

    fn to_f64(self) -> f64;
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_count(n: u64) -> Self {
                n as $t
            }

            fn from_population(pop: f64) -> Option<Self> {
                pop.is_finite().then_some(pop as $t)
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Exact {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(n as i128)
    }

    fn from_population(pop: f64) -> Option<Self> {
        if pop.is_finite() && pop.fract() == 0.0 && pop.abs() < 1e30 {
            Some(Ratio::from_integer(pop as i128))
        } else {
            // non-integral populations are approximated by a continued fraction
            Ratio::<i128>::from_f64(pop)
        }
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

/// `num / den`, or `None` when the denominator is zero.
pub fn ratio<T: Scalar>(num: T, den: T) -> Option<T> {
    if den == T::zero() {
        None
    } else {
        Some(num / den)
    }
}
