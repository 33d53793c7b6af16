//! Float helpers that work with and without `std`.
//!
//! Under `no_std` the transcendental functions come from `libm`; with `std`
//! they compile to the usual intrinsics. The [`Real`] trait lets the
//! convolution and normalization kernels be written once and instantiated at
//! `f32` (inference) and `f64` (training, where reductions must stay clean
//! for finite-difference checks).

use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

macro_rules! dispatch {
    ($std_expr:expr, $libm_expr:expr) => {{
        #[cfg(feature = "std")]
        {
            $std_expr
        }
        #[cfg(not(feature = "std"))]
        {
            $libm_expr
        }
    }};
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    dispatch!(x.sqrt(), libm::sqrt(x))
}

#[inline]
pub fn cos(x: f64) -> f64 {
    dispatch!(x.cos(), libm::cos(x))
}

#[inline]
pub fn sin(x: f64) -> f64 {
    dispatch!(x.sin(), libm::sin(x))
}

#[inline]
pub fn exp(x: f64) -> f64 {
    dispatch!(x.exp(), libm::exp(x))
}

#[inline]
pub fn ln(x: f64) -> f64 {
    dispatch!(x.ln(), libm::log(x))
}

#[inline]
pub fn floor(x: f64) -> f64 {
    dispatch!(x.floor(), libm::floor(x))
}

#[inline]
pub fn round(x: f64) -> f64 {
    dispatch!(x.round(), libm::round(x))
}

#[inline]
pub fn abs(x: f64) -> f64 {
    dispatch!(x.abs(), libm::fabs(x))
}

#[inline]
pub fn hypot3(dx: f64, dy: f64, dz: f64) -> f64 {
    sqrt(dx * dx + dy * dy + dz * dz)
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Scalar abstraction over `f32`/`f64` for the shared compute kernels.
pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn sqrt(self) -> Self {
        dispatch!(self.sqrt(), libm::sqrtf(self))
    }
    #[inline]
    fn abs(self) -> Self {
        dispatch!(self.abs(), libm::fabsf(self))
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}
