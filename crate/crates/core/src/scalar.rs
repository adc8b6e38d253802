//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the simulator is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or physical constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + FftNum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// `exp(j·phi)`.
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

/// Imaginary unit.
#[inline]
pub fn j<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase<T: Real>(phi: T) -> T {
    let two_pi = T::TAU();
    let mut w = phi - two_pi * (phi / two_pi).round();
    if w <= -T::PI() {
        w += two_pi;
    } else if w > T::PI() {
        w -= two_pi;
    }
    w
}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase_positive<T: Real>(phi: T) -> T {
    let two_pi = T::TAU();
    let mut w = phi - two_pi * (phi / two_pi).floor();
    if w >= two_pi {
        w -= two_pi;
    }
    if w < T::zero() {
        w += two_pi;
    }
    w
}

/// Argument of a complex number mapped into `[0, 2π)`.
#[inline]
pub fn arg_positive<T: Real>(z: Complex<T>) -> T {
    wrap_phase_positive(z.arg())
}
