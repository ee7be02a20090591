//! Forward-mode dual numbers.
//!
//! `Dual<T>` carries a primal value and one tangent. Because `Dual<T>` is
//! itself a [`Scalar`] whenever `T` is, nesting (`Dual<Dual<f64>>`, or a dual
//! whose slots are tape variables) gives second-order propagation.

use core::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub primal: T,
    pub tangent: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(primal: T, tangent: T) -> Self {
        Dual { primal, tangent }
    }

    /// A value with zero tangent.
    pub fn constant(primal: T) -> Self {
        Dual {
            primal,
            tangent: T::from_f64(0.0),
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual::new(self.primal + rhs.primal, self.tangent + rhs.tangent)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual::new(self.primal - rhs.primal, self.tangent - rhs.tangent)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual::new(
            self.primal * rhs.primal,
            self.primal * rhs.tangent + self.tangent * rhs.primal,
        )
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.primal / rhs.primal;
        Dual::new(q, (self.tangent - q * rhs.tangent) / rhs.primal)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.primal, -self.tangent)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }

    #[inline]
    fn primal(&self) -> f64 {
        self.primal.primal()
    }

    #[inline]
    fn exp(self) -> Self {
        let e = self.primal.exp();
        Dual::new(e, self.tangent * e)
    }

    #[inline]
    fn ln(self) -> Self {
        Dual::new(self.primal.ln(), self.tangent / self.primal)
    }

    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.primal.sin(), self.tangent * self.primal.cos())
    }

    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.primal.cos(), -(self.tangent * self.primal.sin()))
    }

    #[inline]
    fn powf(self, p: f64) -> Self {
        let d = T::from_f64(p) * self.primal.powf(p - 1.0);
        Dual::new(self.primal.powf(p), self.tangent * d)
    }

    fn all_finite(&self) -> bool {
        self.primal.all_finite() && self.tangent.all_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    fn seed(x: f64) -> Dual<f64> {
        Dual::new(x, 1.0)
    }

    #[test]
    fn product_rule() {
        let a = Dual::new(3.0, 2.0);
        let b = Dual::new(5.0, -1.0);
        let c = a * b;
        assert_eq!(c.primal, 15.0);
        assert_eq!(c.tangent, -3.0 + 2.0 * 5.0);
    }

    #[test]
    fn elementary_derivatives() {
        let x = 0.7;
        assert!((seed(x).exp().tangent - math::exp(x)).abs() < 1e-15);
        assert!((seed(x).ln().tangent - 1.0 / x).abs() < 1e-15);
        assert!((seed(x).sin().tangent - math::cos(x)).abs() < 1e-15);
        assert!((seed(x).cos().tangent + math::sin(x)).abs() < 1e-15);
        assert!((seed(x).powf(2.5).tangent - 2.5 * math::powf(x, 1.5)).abs() < 1e-14);
        let q = Dual::from_f64(1.0) / seed(x);
        assert!((q.tangent + 1.0 / (x * x)).abs() < 1e-14);
    }

    #[test]
    fn nested_gives_second_derivative() {
        // d²/dx² x³ = 6x
        let x = Dual::new(Dual::new(2.0, 1.0), Dual::new(1.0, 0.0));
        let y = x * x * x;
        assert_eq!(y.primal.primal, 8.0);
        assert_eq!(y.tangent.primal, 12.0);
        assert_eq!(y.tangent.tangent, 12.0);
    }
}
