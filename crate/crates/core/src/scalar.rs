//! Scalar abstraction shared by every numeric module.
//!
//! The dynamics, fixed-point and regression code is written once over
//! [`Real`]. Binary64 is the working precision; [`twofloat::TwoFloat`]
//! (double-double, ~32 digits) is used where orbit sensitivity outruns it,
//! mainly deep principal nests of real Fibonacci maps.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use twofloat::TwoFloat;

pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Rounds to binary64, used for statistics and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative rounding unit. `Float::epsilon` cannot be used for
    /// `TwoFloat`, which reports the smallest positive normal there.
    #[inline]
    fn unit_roundoff() -> Self {
        Self::epsilon()
    }

    /// `|x|^e`, using repeated multiplication when `e` is a small integer.
    fn abs_pow(self, e: Self) -> Self {
        let x = self.abs();
        let r = e.round();
        if r == e && e > Self::zero() && e <= Self::lit(64.0) {
            x.powi(e.to_i32().unwrap_or(1))
        } else if x == Self::zero() {
            Self::zero()
        } else {
            x.powf(e)
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
impl Real for TwoFloat {
    // The crate's `FromPrimitive::from_f64` drops the fractional part.
    fn lit(x: f64) -> Self {
        TwoFloat::from(x)
    }

    fn unit_roundoff() -> Self {
        TwoFloat::from(f64::EPSILON * f64::EPSILON)
    }
}

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Natural log of the modulus, `-inf` at the origin.
#[inline]
pub(crate) fn ln_abs<T: Real>(z: Complex<T>) -> T {
    z.norm().ln()
}
