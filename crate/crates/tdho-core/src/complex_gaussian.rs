//! Closed-form moments of complex Gaussian exponentials.
//!
//! Everything the weak-value and overlap machinery integrates in 1D has the
//! shape exp(-a x^2 + b x + c) with Re(a) > 0, possibly times x. Keeping the
//! three coefficients explicit makes products, conjugates and window factors
//! exact bookkeeping, and the two moments below close every inner product in
//! the crate.

use crate::real::{cr, Real, C};

/// The function x -> exp(-a x^2 + b x + c), Re(a) > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussExp<T> {
    pub a: C<T>,
    pub b: C<T>,
    pub c: C<T>,
}

impl<T: Real> GaussExp<T> {
    pub fn new(a: C<T>, b: C<T>, c: C<T>) -> Self {
        Self { a, b, c }
    }

    /// Real Gaussian window exp(-(x - center)^2 / width^2).
    pub fn window(center: T, width: T) -> Self {
        let inv_w2 = T::one() / (width * width);
        Self {
            a: cr(inv_w2),
            b: cr(T::two() * center * inv_w2),
            c: cr(-center * center * inv_w2),
        }
    }

    /// Pointwise complex conjugate of the function.
    pub fn conj(&self) -> Self {
        Self { a: self.a.conj(), b: self.b.conj(), c: self.c.conj() }
    }

    /// Pointwise product.
    pub fn product(&self, other: &Self) -> Self {
        Self { a: self.a + other.a, b: self.b + other.b, c: self.c + other.c }
    }

    pub fn eval(&self, x: T) -> C<T> {
        (-self.a * x * x + self.b * x + self.c).exp()
    }

    /// Integral over the real line.
    pub fn moment0(&self) -> C<T> {
        debug_assert!(self.a.re > T::zero(), "divergent Gaussian integral");
        let pi = cr::<T>(T::PI());
        (pi / self.a).sqrt() * (self.b * self.b / (self.a * T::of(4.0)) + self.c).exp()
    }

    /// Integral of x times the function.
    pub fn moment1(&self) -> C<T> {
        self.moment0() * self.b / (self.a * T::two())
    }
}
