//! Floating point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the library is generic over: `f32` or `f64`.
///
/// All published tolerances are calibrated for `f64`; `f32` is supported for
/// the geometric layer (Moebius maps, cross-ratios, vector fields) at
/// correspondingly looser tolerances.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x - two_pi * ((x + T::PI()) / two_pi).floor();
    // floor leaves y in [-pi, pi); move the lower endpoint to +pi
    if y <= -T::PI() {
        y += two_pi;
    }
    y
}

/// Reduces an angle into `[0, 2 pi)`.
pub fn rem_turn<T: Scalar>(x: T) -> T {
    let two_pi = T::TAU();
    let y = x - two_pi * (x / two_pi).floor();
    if y >= two_pi {
        y - two_pi
    } else {
        y
    }
}

/// Absolute angular distance on the circle, in `[0, pi]`.
#[inline]
pub fn circle_distance<T: Scalar>(a: T, b: T) -> T {
    wrap_angle(a - b).abs()
}
