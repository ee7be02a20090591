use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;

/// Numeric type over which kernels are written.
///
/// The operation set is closed: the four arithmetic operators, negation,
/// `exp`, `ln`, `sin`, `cos`, power with a constant real exponent, and `dot`.
/// Every differentiation mode in this crate is obtained by evaluating the
/// same generic kernel over a different `Scalar`.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lift a constant.
    fn from_f64(v: f64) -> Self;

    /// Innermost real value, stripping every level of derivative data.
    fn primal(&self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powf(self, p: f64) -> Self;

    /// Inner product. Tape-backed scalars record this as a single n-ary node.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = Self::from_f64(0.0);
        for (x, y) in a.iter().zip(b) {
            acc = acc + *x * *y;
        }
        acc
    }

    /// True when every real number carried (primal and derivative parts) is finite.
    fn all_finite(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn primal(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        math::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        math::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        math::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        math::cos(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        math::powf(self, p)
    }
    #[inline]
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}
