//! Scalar abstraction shared by the geometry code.

use std::fmt::{Debug, Display};

use num_rational::Rational32;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar used for lattice and coordinate math: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn from_ratio(r: Rational32) -> Self {
        Self::lit(f64::from(*r.numer()) / f64::from(*r.denom()))
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec3<T> = [T; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Euclidean distance between two fractional points on the unit torus,
/// i.e. the periodic distance under an identity metric.
#[inline]
pub fn torus_distance<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    let d = sub(a, b);
    let d = [d[0] - d[0].round(), d[1] - d[1].round(), d[2] - d[2].round()];
    norm(d)
}

/// Largest per-axis periodic separation between two fractional points.
#[inline]
pub fn torus_max_separation<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    let d = sub(a, b);
    (0..3)
        .map(|i| (d[i] - d[i].round()).abs())
        .fold(T::zero(), T::max)
}

pub fn cast3<T: Real, U: Real>(v: Vec3<T>) -> Vec3<U> {
    [U::lit(v[0].as_f64()), U::lit(v[1].as_f64()), U::lit(v[2].as_f64())]
}
