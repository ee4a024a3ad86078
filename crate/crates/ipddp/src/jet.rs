//! Forward-mode second-order numbers.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to a fixed set of seed variables. Evaluating a problem function on
//! jets therefore yields the exact first and second derivatives of every
//! output in a single pass; no nesting is required.
//!
//! Constants are represented with dimension 0 and broadcast against seeded
//! jets, so problem code can call `S::from_f64(..)` without knowing the seed
//! dimension.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{real, Real, Smooth};

/// Value, gradient, and Hessian with respect to the seed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T: Real> {
    value: T,
    grad: DVector<T>,
    hess: DMatrix<T>,
}

impl<T: Real> Jet<T> {
    /// A constant: zero derivatives, broadcastable to any dimension.
    pub fn constant(value: T) -> Self {
        Jet {
            value,
            grad: DVector::zeros(0),
            hess: DMatrix::zeros(0, 0),
        }
    }

    /// The `index`-th of `dim` seed variables.
    pub fn variable(value: T, index: usize, dim: usize) -> Self {
        assert!(index < dim, "seed index out of range");
        let mut grad = DVector::zeros(dim);
        grad[index] = T::one();
        Jet {
            value,
            grad,
            hess: DMatrix::zeros(dim, dim),
        }
    }

    pub fn value(&self) -> T {
        self.value
    }

    /// Seed dimension; 0 for constants.
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Gradient expanded to dimension `dim` (constants give zeros).
    pub fn gradient(&self, dim: usize) -> DVector<T> {
        if self.dim() == 0 {
            DVector::zeros(dim)
        } else {
            assert_eq!(self.dim(), dim, "jet dimension mismatch");
            self.grad.clone()
        }
    }

    /// Hessian expanded to dimension `dim` (constants give zeros).
    pub fn hessian(&self, dim: usize) -> DMatrix<T> {
        if self.dim() == 0 {
            DMatrix::zeros(dim, dim)
        } else {
            assert_eq!(self.dim(), dim, "jet dimension mismatch");
            self.hess.clone()
        }
    }

    fn join_dim(&self, other: &Self) -> usize {
        match (self.dim(), other.dim()) {
            (0, d) | (d, 0) => d,
            (da, db) => {
                assert_eq!(da, db, "jet dimension mismatch: {da} vs {db}");
                da
            }
        }
    }

    fn into_parts(self, dim: usize) -> (T, DVector<T>, DMatrix<T>) {
        if self.dim() == dim {
            (self.value, self.grad, self.hess)
        } else {
            (self.value, DVector::zeros(dim), DMatrix::zeros(dim, dim))
        }
    }

    /// Chain rule through a unary map with value `f0`, first derivative `f1`,
    /// and second derivative `f2` at `self.value`.
    fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        let hess = if self.dim() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            &self.hess * f1 + (&self.grad * self.grad.transpose()) * f2
        };
        Jet {
            value: f0,
            grad: &self.grad * f1,
            hess,
        }
    }
}

impl<T: Real> std::ops::Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Self {
        let d = self.join_dim(&rhs);
        let (av, ag, ah) = self.into_parts(d);
        let (bv, bg, bh) = rhs.into_parts(d);
        Jet {
            value: av + bv,
            grad: ag + bg,
            hess: ah + bh,
        }
    }
}

impl<T: Real> std::ops::Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Self {
        let d = self.join_dim(&rhs);
        let (av, ag, ah) = self.into_parts(d);
        let (bv, bg, bh) = rhs.into_parts(d);
        Jet {
            value: av - bv,
            grad: ag - bg,
            hess: ah - bh,
        }
    }
}

impl<T: Real> std::ops::Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Self {
        let d = self.join_dim(&rhs);
        let (av, ag, ah) = self.into_parts(d);
        let (bv, bg, bh) = rhs.into_parts(d);
        let cross = &ag * bg.transpose();
        Jet {
            value: av * bv,
            grad: &ag * bv + &bg * av,
            hess: ah * bv + bh * av + &cross + cross.transpose(),
        }
    }
}

impl<T: Real> std::ops::Div for Jet<T> {
    type Output = Jet<T>;
    fn div(self, rhs: Self) -> Self {
        let d = self.join_dim(&rhs);
        let (av, ag, ah) = self.into_parts(d);
        let (bv, bg, bh) = rhs.into_parts(d);
        // Quotient rule solved from a = q * b so the value keeps the same
        // rounding path as plain division.
        let q = av / bv;
        let grad = (ag - &bg * q) / bv;
        let cross = &grad * bg.transpose();
        let hess = (ah - &cross - cross.transpose() - bh * q) / bv;
        Jet {
            value: q,
            grad,
            hess,
        }
    }
}

impl<T: Real> std::ops::Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Self {
        Jet {
            value: -self.value,
            grad: -self.grad,
            hess: -self.hess,
        }
    }
}

impl<T: Real> Smooth<T> for Jet<T> {
    fn from_f64(c: f64) -> Self {
        Jet::constant(real(c))
    }

    fn from_real(r: T) -> Self {
        Jet::constant(r)
    }

    fn value(&self) -> T {
        self.value
    }

    fn sin(&self) -> Self {
        let (s, c) = (Smooth::<T>::sin(&self.value), Smooth::<T>::cos(&self.value));
        self.chain(s, c, -s)
    }

    fn cos(&self) -> Self {
        let (s, c) = (Smooth::<T>::sin(&self.value), Smooth::<T>::cos(&self.value));
        self.chain(c, -s, -c)
    }

    fn asin(&self) -> Self {
        let v = self.value;
        let w = T::one() - v * v;
        let root = Smooth::<T>::sqrt(&w);
        self.chain(Smooth::<T>::asin(&v), T::one() / root, v / (w * root))
    }

    fn exp(&self) -> Self {
        let e = Smooth::<T>::exp(&self.value);
        self.chain(e, e, e)
    }

    fn ln(&self) -> Self {
        let v = self.value;
        let inv = T::one() / v;
        self.chain(Smooth::<T>::ln(&v), inv, -inv * inv)
    }

    fn sqrt(&self) -> Self {
        let s = Smooth::<T>::sqrt(&self.value);
        let half = real::<T>(0.5);
        let quarter = real::<T>(0.25);
        self.chain(s, half / s, -quarter / (s * s * s))
    }

    fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let f0 = Smooth::<T>::powi(&v, n);
        let nf = real::<T>(f64::from(n));
        let f1 = nf * Smooth::<T>::powi(&v, n - 1);
        let f2 = nf * real::<T>(f64::from(n - 1)) * Smooth::<T>::powi(&v, n - 2);
        self.chain(f0, f1, f2)
    }
}
