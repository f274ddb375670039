//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All estimators and selection rules are written against [`Real`], which is
//! implemented for `f32` and `f64`. The error function is delegated to `libm`
//! (a port of the FreeBSD msun routines, accurate to within one ulp), which
//! gives normal tail probabilities with absolute error well below `1e-12` in
//! double precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub(crate) fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// 1/sqrt(2*pi)
#[inline]
pub(crate) fn inv_sqrt_2pi<T: Real>() -> T {
    lit(0.398_942_280_401_432_7)
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf<T: Real>(z: T) -> T {
    inv_sqrt_2pi::<T>() * (-(z * z) / lit(2.0)).exp()
}

/// Gaussian kernel `phi_h(z) = exp(-z^2 / (2 h^2)) / (sqrt(2 pi) h)`.
#[inline]
pub fn normal_pdf<T: Real>(z: T, h: T) -> T {
    std_normal_pdf(z / h) / h
}

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf<T: Real>(z: T) -> T {
    lit::<T>(0.5) * (-z / lit::<T>(std::f64::consts::SQRT_2)).erfc()
}

/// Upper tail `1 - Phi(z)`, evaluated without cancellation for large `z`.
#[inline]
pub fn std_normal_sf<T: Real>(z: T) -> T {
    lit::<T>(0.5) * (z / lit::<T>(std::f64::consts::SQRT_2)).erfc()
}

/// `Phi(b) - Phi(a)` for `a <= b`, switching to upper tails on the right
/// half-line so that far-right intervals keep their relative accuracy.
pub fn std_normal_interval<T: Real>(a: T, b: T) -> T {
    if a >= T::zero() {
        std_normal_sf(a) - std_normal_sf(b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}
