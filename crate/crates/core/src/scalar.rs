//! Numeric scalar abstraction shared by the metric code.
//!
//! Proportions, parity differences, and overlap scores are ratios of counts
//! and weights, so they are written once against [`Scalar`] and instantiated
//! for `f32`, `f64`, or the exact [`Rational`] type. Statistics that need
//! transcendental functions (the t distribution) are bounded on
//! [`num_traits::Float`] instead.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational scalar used by the oracle paths.
pub type Rational = Ratio<i64>;

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Slack allowed when checking identities such as `p_left + p_right = 1`.
    fn tolerance() -> Self;

    /// Round to the nearest integer, halves away from zero.
    fn round_half_away(self) -> i64;

    /// `num / den` without going through a lossy float for exact types.
    fn from_counts(num: u64, den: u64) -> Self {
        Self::from_u64(num).expect("count fits scalar") / Self::from_u64(den).expect("count fits scalar")
    }

    /// Best-effort conversion from an `f64` configuration value.
    fn from_f64_lossy(value: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn round_half_away(self) -> i64 {
        self.round() as i64
    }

    fn from_f64_lossy(value: f64) -> Self {
        value
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }

    fn round_half_away(self) -> i64 {
        self.round() as i64
    }

    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }
}

impl Scalar for Rational {
    fn tolerance() -> Self {
        Ratio::from_integer(0)
    }

    fn round_half_away(self) -> i64 {
        self.round().to_integer()
    }

    /// Recovers short decimals like `0.4` as `2/5` rather than the binary
    /// expansion of the nearest double.
    fn from_f64_lossy(value: f64) -> Self {
        let scaled = (value * 1e9).round();
        if (scaled / 1e9 - value).abs() <= f64::EPSILON * value.abs().max(1.0) && scaled.abs() < 9e18 {
            Ratio::new(scaled as i64, 1_000_000_000)
        } else {
            Ratio::approximate_float(value).unwrap_or_else(|| Ratio::from_integer(0))
        }
    }
}

/// Two, without needing a `From<u8>` bound.
pub(crate) fn two<T: Scalar>() -> T {
    T::one() + T::one()
}
