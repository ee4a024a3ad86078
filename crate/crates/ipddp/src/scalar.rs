//! Scalar abstractions: the working floating-point type and the evaluation
//! scalar that problem functions are written against.

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{ComplexField, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point type all solver arithmetic runs in: `f32` or `f64`.
pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + LowerExp + Display + Debug
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal to the working scalar.
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal not representable in scalar type")
}

/// `max` that avoids the `RealField`/`Float` method ambiguity.
pub fn rmax<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// `min` counterpart of [`rmax`].
pub fn rmin<T: Real>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Numbers that dynamics, cost, and constraint functions are evaluated over.
///
/// Problem code is written once against this trait and then run either on the
/// plain scalar `T` (simulation, merit evaluation) or on [`crate::jet::Jet`]
/// (derivative extraction). Only smooth operations are exposed; anything
/// nondifferentiable stays out of problem functions by construction.
pub trait Smooth<T: Real>:
    Sized
    + Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn from_real(r: T) -> Self;

    /// Primal part of the number.
    fn value(&self) -> T;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn asin(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    /// `self * self`.
    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }

    /// Multiply by a constant.
    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::from_f64(c)
    }
}

impl<T: Real> Smooth<T> for T {
    fn from_f64(c: f64) -> Self {
        real(c)
    }

    fn from_real(r: T) -> Self {
        r
    }

    fn value(&self) -> T {
        *self
    }

    fn sin(&self) -> Self {
        ComplexField::sin(*self)
    }

    fn cos(&self) -> Self {
        ComplexField::cos(*self)
    }

    fn asin(&self) -> Self {
        ComplexField::asin(*self)
    }

    fn exp(&self) -> Self {
        ComplexField::exp(*self)
    }

    fn ln(&self) -> Self {
        ComplexField::ln(*self)
    }

    fn sqrt(&self) -> Self {
        ComplexField::sqrt(*self)
    }

    fn powi(&self, n: i32) -> Self {
        ComplexField::powi(*self, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_scalar_ops_match_std() {
        let x: f64 = 0.37;
        assert_eq!(Smooth::<f64>::sin(&x), x.sin());
        assert_eq!(Smooth::<f64>::sqrt(&x), x.sqrt());
        assert_eq!(x.sq(), x * x);
        assert_eq!(x.scale(2.0), 2.0 * x);
    }

    #[test]
    fn rmax_rmin_order() {
        assert_eq!(rmax(1.0, 2.0), 2.0);
        assert_eq!(rmax(2.0, 1.0), 2.0);
        assert_eq!(rmin(1.0f32, 2.0), 1.0);
    }
}
