//! Exact one-axis propagator of the driven oscillator in amplitude-phase
//! variables.
//!
//! With Delta = phi(t1) - phi(t0) the classical action between endpoints is
//!
//! ```text
//!   R(x1, x0) = (m/2) [ x1^2 a'(t1)/a(t1) - x0^2 a'(t0)/a(t0) ]
//!             + m hbar cot(Delta) [ x1^2/a(t1)^2 + x0^2/a(t0)^2 ]
//!             - 2 m hbar x1 x0 / ( a(t1) a(t0) sin(Delta) ),
//! ```
//!
//! obtained from R = (m/2)[q q']_{t0}^{t1} for q'' + V(t) q = 0 (the
//! amplitude boundary terms carry the factor 1/2). The kernel is
//!
//! ```text
//!   K = sqrt( |d^2 R / dx1 dx0| / (2 pi hbar) )
//!       * exp(-i pi/4) * (-i)^floor(Delta/pi) * exp(i R / hbar),
//! ```
//!
//! the phase convention being fixed by the static-oscillator kernel on
//! 0 < Delta < pi and continued across amplitude refocusing times by the
//! floor factor. At Delta = k pi the prefactor diverges (a caustic); queries
//! near those times are refused. The kernel does not depend on which Ermakov
//! solution supplies (alpha, phi) -- any positive-amplitude profile of the
//! same potential gives the same K, which the tests exercise.

use crate::complex_gaussian::GaussExp;
use crate::ermakov::GuidingTrajectory;
use crate::error::{CoreError, Result};
use crate::real::{cr, im, Real, C};
use crate::vec2::Axis;

/// Default exclusion half-width around caustic phases, in radians.
pub const CAUSTIC_EPSILON: f64 = 1e-3;

struct KernelParts<T> {
    /// Coefficient of x0^2 in R.
    r00: T,
    /// Coefficient of x1^2 in R.
    r11: T,
    /// Coefficient of x1 x0 in R.
    r10: T,
    /// log |prefactor| + i * (constant phase).
    log_norm: C<T>,
}

fn kernel_parts<T: Real>(
    traj: &GuidingTrajectory<T>,
    axis: Axis,
    t1: T,
    t0: T,
    caustic_eps: T,
) -> Result<KernelParts<T>> {
    let params = &traj.params;
    let s0 = traj.state_at(axis, t0)?;
    let s1 = traj.state_at(axis, t1)?;
    let delta = s1.phi - s0.phi;

    let pi = T::PI();
    let k_near = (delta / pi).round();
    if (delta - k_near * pi).abs() < caustic_eps {
        return Err(CoreError::Caustic {
            delta_phi: delta.to_f64().unwrap_or(f64::NAN),
            epsilon: caustic_eps.to_f64().unwrap_or(f64::NAN),
        });
    }

    let m = params.mass;
    let hbar = params.hbar;
    let (sin_d, cos_d) = (delta.sin(), delta.cos());
    let cot_d = cos_d / sin_d;

    let half_m = m * T::half();
    let r11 = half_m * s1.alpha_dot / s1.alpha + m * hbar * cot_d / (s1.alpha * s1.alpha);
    let r00 = -half_m * s0.alpha_dot / s0.alpha + m * hbar * cot_d / (s0.alpha * s0.alpha);
    let r10 = -T::two() * m * hbar / (s1.alpha * s0.alpha * sin_d);

    // |d^2R/dx1 dx0| = |r10|; Van Vleck prefactor.
    let norm = (r10.abs() / (T::two() * pi * hbar)).sqrt();
    // Branch index of the phase continuation.
    let branch = (delta / pi).floor();
    let phase = -T::FRAC_PI_4() - T::FRAC_PI_2() * branch;
    Ok(KernelParts { r00, r11, r10, log_norm: C::new(norm.ln(), phase) })
}

/// K(x1, t1; x0, t0) along one axis. `traj` supplies the (alpha, phi)
/// profile of the potential; its classical (q, p) content is irrelevant.
pub fn propagator_1d<T: Real>(
    traj: &GuidingTrajectory<T>,
    axis: Axis,
    x1: T,
    t1: T,
    x0: T,
    t0: T,
) -> Result<C<T>> {
    propagator_1d_eps(traj, axis, x1, t1, x0, t0, T::of(CAUSTIC_EPSILON))
}

/// Same as [`propagator_1d`] with an explicit caustic exclusion width.
pub fn propagator_1d_eps<T: Real>(
    traj: &GuidingTrajectory<T>,
    axis: Axis,
    x1: T,
    t1: T,
    x0: T,
    t0: T,
    caustic_eps: T,
) -> Result<C<T>> {
    let parts = kernel_parts(traj, axis, t1, t0, caustic_eps)?;
    let hbar = traj.params.hbar;
    let action = parts.r11 * x1 * x1 + parts.r00 * x0 * x0 + parts.r10 * x1 * x0;
    Ok((parts.log_norm + im::<T>() * (action / hbar)).exp())
}

/// Classical action R(x1, t1; x0, t0) along one axis.
pub fn classical_action<T: Real>(
    traj: &GuidingTrajectory<T>,
    axis: Axis,
    x1: T,
    t1: T,
    x0: T,
    t0: T,
) -> Result<T> {
    // The action itself is caustic-divergent too; reuse the same guard.
    let parts = kernel_parts(traj, axis, t1, t0, T::of(CAUSTIC_EPSILON))?;
    Ok(parts.r11 * x1 * x1 + parts.r00 * x0 * x0 + parts.r10 * x1 * x0)
}

/// The kernel as a Gaussian exponential in x0 with x1 and the times fixed:
/// exp(-a x0^2 + b x0 + c). This is what short-interval weak-momentum
/// evaluations integrate against in closed form. The caustic guard is not
/// applied: for Delta -> 0 the kernel degenerates to a delta function, but
/// its Gaussian moments against a packet stay perfectly finite.
pub fn kernel_quadratic_in_x0<T: Real>(
    traj: &GuidingTrajectory<T>,
    axis: Axis,
    x1: T,
    t1: T,
    t0: T,
) -> Result<GaussExp<T>> {
    let parts = kernel_parts(traj, axis, t1, t0, T::of(1e-300))?;
    let hbar = traj.params.hbar;
    let i = im::<T>();
    let a = -(i * (parts.r00 / hbar));
    let b = i * (parts.r10 * x1 / hbar);
    let c = i * (parts.r11 * x1 * x1 / hbar) + parts.log_norm;
    Ok(GaussExp::new(a, b, c))
}

/// Textbook static-oscillator action for tests and the phase-convention
/// anchor: R = (m w / 2) (x1^2 + x0^2) cot(w dt) - m w x1 x0 / sin(w dt).
pub fn static_action<T: Real>(mass: T, omega: T, x1: T, x0: T, dt: T) -> T {
    let s = (omega * dt).sin();
    let c = (omega * dt).cos();
    mass * omega * ((x1 * x1 + x0 * x0) * c / s * T::half() - x1 * x0 / s)
}

/// Textbook static-oscillator kernel on 0 < w dt < pi.
pub fn static_kernel<T: Real>(mass: T, hbar: T, omega: T, x1: T, x0: T, dt: T) -> C<T> {
    let s = (omega * dt).sin();
    let norm = (mass * omega / (T::two() * T::PI() * hbar * s.abs())).sqrt();
    let phase = -T::FRAC_PI_4() - T::FRAC_PI_2() * (omega * dt / T::PI()).floor();
    let action = static_action(mass, omega, x1, x0, dt);
    cr(norm) * (C::new(T::zero(), action / hbar + phase)).exp()
}
