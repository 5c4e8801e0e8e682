//! Scalar abstraction shared by the closed-form machinery.
//!
//! Everything that evaluates a closed form is generic over [`Scalar`]. `f64`
//! is the everyday type; [`Wide`] (IEEE binary128 through libquadmath) is used
//! where the alternating sums of the finite-buffer solution cancel beyond what
//! 53 bits can carry.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Quad-precision float.
pub type Wide = f128::f128;

/// Floating-point type usable by the closed forms.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Significant decimal digits needed for a lossless text round trip.
    const DECIMAL_DIGITS: usize;

    fn to_decimal(self) -> String;

    fn parse_decimal(s: &str) -> Option<Self>;
}

impl Scalar for f64 {
    const DECIMAL_DIGITS: usize = 17;

    fn to_decimal(self) -> String {
        format!("{:.*e}", Self::DECIMAL_DIGITS - 1, self)
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
}

impl Scalar for Wide {
    const DECIMAL_DIGITS: usize = 36;

    fn to_decimal(self) -> String {
        self.to_string_fmt(format!("%.{}Qe", Self::DECIMAL_DIGITS - 1))
            .unwrap_or_else(|| "nan".to_string())
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return None;
        }
        Wide::parse(s).ok()
    }
}

/// Converts an `f64` literal or parameter into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("every Scalar represents f64 values")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("every Scalar represents small integers")
}

/// Nearest `f64`.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Neumaier-compensated sum that also tracks the sum of magnitudes, so the
/// cancellation incurred by the summation can be reported.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
    magnitude: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero(), magnitude: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
        self.magnitude = self.magnitude + x.abs();
    }

    /// Adds a value that is itself a sum whose terms had total magnitude
    /// `magnitude`, so cancellation inside it is still accounted for.
    pub fn add_with_magnitude(&mut self, x: T, magnitude: T) {
        self.add(x);
        self.magnitude = self.magnitude - x.abs() + magnitude.abs();
    }

    /// Adds a term given as `sign * exp(log_magnitude)`.
    pub fn add_log(&mut self, negative: bool, log_magnitude: T) {
        let m = log_magnitude.exp();
        self.add(if negative { -m } else { m });
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }

    pub fn magnitude(&self) -> T {
        self.magnitude
    }

    /// Ratio of the summed magnitudes to the magnitude of the result; the
    /// relative rounding error of the sum is about `condition * epsilon`.
    pub fn condition(&self) -> T {
        let v = self.value().abs();
        if self.magnitude == T::zero() {
            T::one()
        } else if v == T::zero() {
            T::infinity()
        } else {
            self.magnitude / v
        }
    }
}

/// Largest accepted `condition * epsilon`: six decimal digits lost in `f64`.
pub const MAX_ROUNDING: f64 = 1.0e6 * f64::EPSILON;

/// `true` when a sum with the given condition number keeps at least the
/// accuracy of an `f64` sum that lost six digits.
pub fn well_conditioned<T: Scalar>(condition: T) -> bool {
    let rounding = to_f64(condition) * to_f64(T::epsilon());
    rounding.is_finite() && rounding <= MAX_ROUNDING
}

/// `ln(n!)` by direct summation; exact enough for the small orders used here.
pub fn ln_factorial<T: Scalar>(n: usize) -> T {
    (2..=n).fold(T::zero(), |acc, k| acc + count::<T>(k).ln())
}
