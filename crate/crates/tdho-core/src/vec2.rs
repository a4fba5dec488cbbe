//! Minimal 2-vector used for positions, momenta and complex field gradients.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::real::{Real, C};

/// Oscillator axis label. The model is separable; almost everything is
/// computed per axis and combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Plain 2-vector over any component type (real or complex).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2<E> {
    pub x: E,
    pub y: E,
}

impl<E> Vec2<E> {
    #[inline]
    pub fn new(x: E, y: E) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn map<F, U>(self, mut f: F) -> Vec2<U>
    where
        F: FnMut(E) -> U,
    {
        Vec2 { x: f(self.x), y: f(self.y) }
    }
}

impl<E: Copy> Vec2<E> {
    #[inline]
    pub fn get(&self, axis: Axis) -> E {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }

    #[inline]
    pub fn set(&mut self, axis: Axis, value: E) {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
        }
    }
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn zero() -> Self {
        Self { x: T::zero(), y: T::zero() }
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    /// Componentwise lift into the complex plane.
    #[inline]
    pub fn to_complex(self) -> Vec2<C<T>> {
        Vec2 { x: C::new(self.x, T::zero()), y: C::new(self.y, T::zero()) }
    }
}

impl<T: Real> Vec2<C<T>> {
    #[inline]
    pub fn re(self) -> Vec2<T> {
        Vec2 { x: self.x.re, y: self.y.re }
    }

    #[inline]
    pub fn im(self) -> Vec2<T> {
        Vec2 { x: self.x.im, y: self.y.im }
    }

    #[inline]
    pub fn norm_max(self) -> T {
        self.x.norm().max(self.y.norm())
    }
}

impl<E: Add<Output = E>> Add for Vec2<E> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl<E: AddAssign> AddAssign for Vec2<E> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl<E: Sub<Output = E>> Sub for Vec2<E> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

impl<E: Neg<Output = E>> Neg for Vec2<E> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y }
    }
}

impl<E: Mul<Output = E> + Copy> Mul<E> for Vec2<E> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: E) -> Self {
        Self { x: self.x * rhs, y: self.y * rhs }
    }
}

impl<E: Div<Output = E> + Copy> Div<E> for Vec2<E> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: E) -> Self {
        Self { x: self.x / rhs, y: self.y / rhs }
    }
}
