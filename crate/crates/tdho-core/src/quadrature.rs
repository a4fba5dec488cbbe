//! Gauss-Legendre panels with adaptive bisection, in one and two dimensions,
//! plus a polar rule for discs. Integrands here are smooth (Gaussians times
//! polynomials or oscillatory kernels), so moderate-order panels converge
//! quickly; adaptivity only has to find the support.

use crate::real::{Real, C};
use crate::vec2::Vec2;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    let nf = T::of(n as f64);
    for i in 0..n {
        // Chebyshev-like initial guess.
        let theta = T::PI() * (T::of(i as f64) + T::of(0.75)) / (nf + T::half());
        let mut x = theta.cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = T::one();
            let mut p1 = x;
            for k in 2..=n {
                let kf = T::of(k as f64);
                let p2 = ((T::two() * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = nf * (x * p1 - p0) / (x * x - T::one());
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::two() {
                break;
            }
        }
        // Final derivative for the weight.
        let mut p0 = T::one();
        let mut p1 = x;
        for k in 2..=n {
            let kf = T::of(k as f64);
            let p2 = ((T::two() * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = nf * (x * p1 - p0) / (x * x - T::one());
        let w = T::two() / ((T::one() - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn panel_1d<T: Real, F>(f: &F, a: T, b: T, rule: &[(T, T)]) -> C<T>
where
    F: Fn(T) -> C<T>,
{
    let mid = (a + b) * T::half();
    let half = (b - a) * T::half();
    let mut acc = C::new(T::zero(), T::zero());
    for &(x, w) in rule {
        acc = acc + f(mid + half * x) * (w * half);
    }
    acc
}

/// Adaptive 1D integration of a complex-valued integrand.
pub fn integrate_1d<T: Real, F>(f: F, a: T, b: T, tol: T) -> C<T>
where
    F: Fn(T) -> C<T>,
{
    let coarse = gauss_legendre::<T>(12);
    let fine = gauss_legendre::<T>(24);
    let mut total = C::new(T::zero(), T::zero());
    // Work stack of (a, b, depth).
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let ic = panel_1d(&f, lo, hi, &coarse);
        let iff = panel_1d(&f, lo, hi, &fine);
        let err = (iff - ic).norm();
        let local_tol = tol * ((hi - lo) / (b - a)).abs().max(T::of(1e-6));
        if err <= local_tol || depth >= 28 {
            total = total + iff;
        } else {
            let mid = (lo + hi) * T::half();
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug)]
pub struct Rect<T> {
    pub lo: Vec2<T>,
    pub hi: Vec2<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(lo: Vec2<T>, hi: Vec2<T>) -> Self {
        Self { lo, hi }
    }

    pub fn centered(center: Vec2<T>, half_width: T) -> Self {
        let d = Vec2::new(half_width, half_width);
        Self { lo: center - d, hi: center + d }
    }

    pub fn area(&self) -> T {
        (self.hi.x - self.lo.x) * (self.hi.y - self.lo.y)
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Rect<T>) -> Rect<T> {
        Rect {
            lo: Vec2::new(self.lo.x.min(other.lo.x), self.lo.y.min(other.lo.y)),
            hi: Vec2::new(self.hi.x.max(other.hi.x), self.hi.y.max(other.hi.y)),
        }
    }
}

fn panel_2d<T: Real, F>(f: &F, r: &Rect<T>, rule: &[(T, T)]) -> C<T>
where
    F: Fn(Vec2<T>) -> C<T>,
{
    let mx = (r.lo.x + r.hi.x) * T::half();
    let hx = (r.hi.x - r.lo.x) * T::half();
    let my = (r.lo.y + r.hi.y) * T::half();
    let hy = (r.hi.y - r.lo.y) * T::half();
    let mut acc = C::new(T::zero(), T::zero());
    for &(xi, wx) in rule {
        let x = mx + hx * xi;
        let mut row = C::new(T::zero(), T::zero());
        for &(yi, wy) in rule {
            row = row + f(Vec2::new(x, my + hy * yi)) * wy;
        }
        acc = acc + row * wx;
    }
    acc * (hx * hy)
}

/// Adaptive 2D integration over a rectangle by quadrisection.
pub fn integrate_2d<T: Real, F>(f: F, rect: Rect<T>, tol: T) -> C<T>
where
    F: Fn(Vec2<T>) -> C<T>,
{
    let coarse = gauss_legendre::<T>(8);
    let fine = gauss_legendre::<T>(16);
    let total_area = rect.area();
    let mut total = C::new(T::zero(), T::zero());
    let mut stack = vec![(rect, 0u32)];
    while let Some((r, depth)) = stack.pop() {
        let ic = panel_2d(&f, &r, &coarse);
        let iff = panel_2d(&f, &r, &fine);
        let err = (iff - ic).norm();
        let local_tol = tol * (r.area() / total_area).max(T::of(1e-8));
        if err <= local_tol || depth >= 14 {
            total = total + iff;
        } else {
            let mx = (r.lo.x + r.hi.x) * T::half();
            let my = (r.lo.y + r.hi.y) * T::half();
            stack.push((Rect { lo: r.lo, hi: Vec2::new(mx, my) }, depth + 1));
            stack.push((Rect { lo: Vec2::new(mx, r.lo.y), hi: Vec2::new(r.hi.x, my) }, depth + 1));
            stack.push((Rect { lo: Vec2::new(r.lo.x, my), hi: Vec2::new(mx, r.hi.y) }, depth + 1));
            stack.push((Rect { lo: Vec2::new(mx, my), hi: r.hi }, depth + 1));
        }
    }
    total
}

/// Fixed-order polar rule over a disc: Gauss-Legendre radially (with the
/// Jacobian r), uniform (spectrally accurate for periodic integrands)
/// in the angle.
pub fn integrate_disc<T: Real, F>(f: F, center: Vec2<T>, radius: T, n_r: usize, n_theta: usize) -> T
where
    F: Fn(Vec2<T>) -> T,
{
    let radial = gauss_legendre::<T>(n_r);
    let dtheta = T::two() * T::PI() / T::of(n_theta as f64);
    let mut acc = T::zero();
    for &(xi, w) in &radial {
        let r = radius * (xi + T::one()) * T::half();
        let wr = w * radius * T::half() * r;
        for k in 0..n_theta {
            let theta = dtheta * T::of(k as f64);
            let (s, c) = theta.sin_cos();
            acc = acc + f(Vec2::new(center.x + r * c, center.y + r * s)) * wr * dtheta;
        }
    }
    acc
}
