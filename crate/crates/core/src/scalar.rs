//! Scalar abstraction. All numeric code in this crate is generic over the
//! real type; `f32` and `f64` are the supported instantiations, with `f64`
//! being the default precision used by the CLI and the test suite.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use serde::{de::DeserializeOwned, Serialize};

/// Complex number over the crate's real scalar.
pub type C<T> = Complex<T>;

/// Real scalar type bound: `f32` or `f64`.
pub trait RealScalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn from_f(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal converts to scalar")
    }

    /// Complex zero.
    fn c_zero() -> C<Self> {
        C::new(Self::zero(), Self::zero())
    }

    /// Complex one.
    fn c_one() -> C<Self> {
        C::new(Self::one(), Self::zero())
    }

    /// Complex `i`.
    fn c_i() -> C<Self> {
        C::new(Self::zero(), Self::one())
    }
}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

/// Base tolerance of the validity-check ladder (Hermiticity, trace, norms).
///
/// Derived tolerances are fixed multiples of this value: eigenvalue floor
/// `100x`, unit-norm window `1000x`, amplitude-consistency window `1e6 x`.
pub const BASE_TOL: f64 = 1e-12;

/// Base tolerance converted to `T`, widened for narrow scalar types so that
/// `f32` instantiations remain usable.
pub fn base_tol<T: RealScalar>() -> T {
    let spec = T::from_f(BASE_TOL);
    let floor = T::epsilon() * T::from_f(100.0);
    if floor > spec {
        floor
    } else {
        spec
    }
}

/// Eigenvalue floor for positive-semidefiniteness checks (`100 * base`).
pub fn eigen_tol<T: RealScalar>() -> T {
    base_tol::<T>() * T::from_f(100.0)
}

/// Window for unit-norm checks on Bloch vectors (`1000 * base`).
pub fn norm_tol<T: RealScalar>() -> T {
    base_tol::<T>() * T::from_f(1000.0)
}

/// Window for data-consistency clamping in reconstructions (`1e6 * base`).
pub fn consistency_tol<T: RealScalar>() -> T {
    base_tol::<T>() * T::from_f(1e6)
}

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_two_pi<T: RealScalar>(x: T) -> T {
    let tau = T::TAU();
    let mut r = x % tau;
    if r < T::zero() {
        r += tau;
    }
    // `x % tau` can round up to exactly tau for tiny negative x.
    if r >= tau {
        r -= tau;
    }
    r
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi<T: RealScalar>(x: T) -> T {
    let mut r = wrap_two_pi(x);
    if r > T::PI() {
        r -= T::TAU();
    }
    r
}

/// Shortest arc distance between two angles, in `[0, pi]`.
pub fn angle_distance<T: RealScalar>(a: T, b: T) -> T {
    let d = wrap_two_pi(a - b);
    if d > T::PI() {
        T::TAU() - d
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert!((wrap_two_pi(-0.5f64) - (2.0 * std::f64::consts::PI - 0.5)).abs() < 1e-15);
        assert!((wrap_pi(3.5f64) - (3.5 - 2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(wrap_two_pi(0.0f64), 0.0);
    }

    #[test]
    fn angle_distance_shortest_arc() {
        let d = angle_distance(0.1f64, 2.0 * std::f64::consts::PI - 0.1);
        assert!((d - 0.2).abs() < 1e-12);
        assert_eq!(angle_distance(1.0f64, 1.0), 0.0);
    }

    #[test]
    fn tolerance_ladder() {
        assert_eq!(base_tol::<f64>(), 1e-12);
        assert_eq!(eigen_tol::<f64>(), 1e-10);
        assert_eq!(norm_tol::<f64>(), 1e-9);
        // f32 widens to a usable tolerance instead of demanding 1e-12.
        assert!(base_tol::<f32>() > 1e-6);
    }
}
