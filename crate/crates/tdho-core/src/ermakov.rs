//! Joint solution of the classical equation of motion and the Ermakov system
//! for each axis.
//!
//! Per axis the amplitude/phase pair obeys
//!
//! ```text
//!   alpha'' / alpha + V(t) = c0^2 / alpha^4,      phi' = c0 / alpha^2,
//! ```
//!
//! with c0 = 2 hbar, and the classical solution is reconstructed as
//!
//! ```text
//!   q(t) = alpha(t) [ c1 cos(phi(t) - phi_ref) + c2 sin(phi(t) - phi_ref) ],
//! ```
//!
//! with c1 = q_ref/alpha_ref and c2 = p_ref alpha_ref / (2 hbar m). One
//! integration of (alpha, alpha', phi) therefore carries the classical
//! trajectory, the wavepacket width and the quantum phase at once; the
//! reconstruction doubles as a consistency check against directly integrating
//! q'' + V(t) q = 0.

use crate::error::{CoreError, Result};
use crate::ode::{self, DenseOutput, OdeOptions};
use crate::params::OscillatorParams;
use crate::real::Real;
use crate::vec2::{Axis, Vec2};

/// Amplitude positivity floor, relative to the anchor amplitude.
const ALPHA_FLOOR_FRAC: f64 = 1e-9;

/// Heuristic bounded-solution check: warn when alpha wanders this far from
/// its anchor value (parametric resonance of the driven axis).
const ALPHA_GROWTH_WARN_RATIO: f64 = 50.0;

/// Joint Ermakov state of one axis at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErmakovState<T> {
    pub t: T,
    pub q: T,
    pub p: T,
    pub alpha: T,
    pub alpha_dot: T,
    pub phi: T,
}

/// Anchor data of one integrated axis plus its dense (alpha, alpha', phi)
/// solution. `phi(t_ref) = 0` by construction.
#[derive(Clone, Debug)]
pub struct AxisTrajectory<T> {
    sol: DenseOutput<T, 3>,
    pub t_ref: T,
    pub q_ref: T,
    pub p_ref: T,
    pub alpha_ref: T,
    pub alpha_dot_ref: T,
    c1: T,
    c2: T,
    /// max over nodes of alpha / alpha_ref and alpha_ref / alpha.
    excursion: T,
}

impl<T: Real> AxisTrajectory<T> {
    fn state_from(&self, params: &OscillatorParams<T>, t: T, y: [T; 3]) -> ErmakovState<T> {
        let [alpha, alpha_dot, phi] = y;
        let (s, c) = phi.sin_cos();
        let osc = self.c1 * c + self.c2 * s;
        let q = alpha * osc;
        let c0 = params.c0();
        // p = m q' with q' = alpha' * osc + alpha * phi' * d(osc)/dphi.
        let p = params.mass * (alpha_dot * osc + (c0 / alpha) * (-self.c1 * s + self.c2 * c));
        ErmakovState { t, q, p, alpha, alpha_dot, phi }
    }

    pub fn state_at(&self, params: &OscillatorParams<T>, t: T) -> Result<ErmakovState<T>> {
        let y = self.sol.eval(t)?;
        Ok(self.state_from(params, t, y))
    }

    /// States at the integrator's accepted nodes, in increasing time order.
    pub fn node_states(&self, params: &OscillatorParams<T>) -> Vec<ErmakovState<T>> {
        let mut out: Vec<ErmakovState<T>> = self
            .sol
            .nodes()
            .into_iter()
            .map(|(t, y)| self.state_from(params, t, y))
            .collect();
        if out.len() >= 2 && out[0].t > out[out.len() - 1].t {
            out.reverse();
        }
        out
    }
}

/// Initial (or final, for backward runs) conditions per axis. The amplitude
/// slope at the anchor defaults to zero, which is what a plain Gaussian of
/// width alpha0 means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErmakovInit<T> {
    pub q0: Vec2<T>,
    pub p0: Vec2<T>,
    pub alpha0: Vec2<T>,
    pub alpha_dot0: Vec2<T>,
}

impl<T: Real> ErmakovInit<T> {
    /// Same width on both axes, zero amplitude slope.
    pub fn uniform(q0: Vec2<T>, p0: Vec2<T>, alpha0: T) -> Self {
        Self { q0, p0, alpha0: Vec2::new(alpha0, alpha0), alpha_dot0: Vec2::zero() }
    }
}

/// Dense joint solution for both axes over one time span.
#[derive(Clone, Debug)]
pub struct GuidingTrajectory<T> {
    pub params: OscillatorParams<T>,
    axes: [AxisTrajectory<T>; 2],
}

impl<T: Real> GuidingTrajectory<T> {
    pub fn axis(&self, axis: Axis) -> &AxisTrajectory<T> {
        &self.axes[axis.index()]
    }

    /// Anchor time (phi = 0, where the init data applies).
    pub fn t_ref(&self) -> T {
        self.axes[0].t_ref
    }

    pub fn q_ref(&self) -> Vec2<T> {
        Vec2::new(self.axes[0].q_ref, self.axes[1].q_ref)
    }

    pub fn p_ref(&self) -> Vec2<T> {
        Vec2::new(self.axes[0].p_ref, self.axes[1].p_ref)
    }

    /// Covered time span as (low, high).
    pub fn span(&self) -> (T, T) {
        let (lo0, hi0) = self.axes[0].sol.span();
        let (lo1, hi1) = self.axes[1].sol.span();
        (lo0.max(lo1), hi0.min(hi1))
    }

    pub fn state_at(&self, axis: Axis, t: T) -> Result<ErmakovState<T>> {
        self.axis(axis).state_at(&self.params, t)
    }

    pub fn position(&self, t: T) -> Result<Vec2<T>> {
        Ok(Vec2::new(self.state_at(Axis::X, t)?.q, self.state_at(Axis::Y, t)?.q))
    }

    pub fn momentum(&self, t: T) -> Result<Vec2<T>> {
        Ok(Vec2::new(self.state_at(Axis::X, t)?.p, self.state_at(Axis::Y, t)?.p))
    }

    /// Largest relative amplitude excursion seen on either axis.
    pub fn amplitude_excursion(&self) -> T {
        self.axes[0].excursion.max(self.axes[1].excursion)
    }

    /// Heuristic parametric-instability warning; the Ermakov machinery itself
    /// stays exact either way.
    pub fn stability_warning(&self) -> Option<String> {
        let ratio = self.amplitude_excursion();
        if ratio > T::of(ALPHA_GROWTH_WARN_RATIO) {
            Some(format!(
                "amplitude excursion ratio {:.3e} exceeds {}; drive parameters look parametrically unstable",
                ratio.to_f64().unwrap_or(f64::NAN),
                ALPHA_GROWTH_WARN_RATIO
            ))
        } else {
            None
        }
    }

    /// Residual of the amplitude equation, |alpha''/alpha + V - c0^2/alpha^4|,
    /// with alpha'' from a five-point difference of the integrated alpha' so
    /// the check does not reuse the ODE right-hand side.
    pub fn ermakov_residual(&self, axis: Axis, t: T, h: T) -> Result<T> {
        let params = &self.params;
        let f = |dt: T| -> Result<T> { Ok(self.state_at(axis, t + dt)?.alpha_dot) };
        let alpha_dd = (f(-T::two() * h)? - f(T::two() * h)?
            + (f(h)? - f(-h)?) * T::of(8.0))
            / (T::of(12.0) * h);
        let s0 = self.state_at(axis, t)?;
        let c0 = params.c0();
        let a = s0.alpha;
        Ok((alpha_dd / a + params.potential(axis, t) - c0 * c0 / (a * a * a * a)).abs())
    }
}

fn integrate_axis<T: Real>(
    params: &OscillatorParams<T>,
    axis: Axis,
    q_ref: T,
    p_ref: T,
    alpha_ref: T,
    alpha_dot_ref: T,
    t_ref: T,
    t_out: T,
    opts: &OdeOptions<T>,
) -> Result<AxisTrajectory<T>> {
    if !(alpha_ref > T::zero()) {
        return Err(CoreError::InvalidParameter(format!(
            "alpha0 must be positive on axis {:?} (got {})",
            axis, alpha_ref
        )));
    }
    let c0 = params.c0();
    let c0_sq = c0 * c0;
    let p = *params;
    let rhs = move |t: T, y: &[T; 3]| {
        let alpha = y[0];
        let a2 = alpha * alpha;
        [y[1], -p.potential(axis, t) * alpha + c0_sq / (a2 * alpha), c0 / a2]
    };

    let floor = alpha_ref * T::of(ALPHA_FLOOR_FRAC);
    let (sol, halt) = ode::integrate_monitored(
        rhs,
        t_ref,
        [alpha_ref, alpha_dot_ref, T::zero()],
        t_out,
        opts,
        |_t, y: &[T; 3]| if y[0] <= floor { Some(y[0]) } else { None },
    )?;
    if let Some(h) = halt {
        return Err(CoreError::AmplitudeCollapse {
            t: h.t,
            alpha: h.reason.to_f64().unwrap_or(f64::NAN),
            floor: floor.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut excursion = T::one();
    for (_t, y) in sol.nodes() {
        let r = (y[0] / alpha_ref).max(alpha_ref / y[0]);
        excursion = excursion.max(r);
    }

    let c1 = q_ref / alpha_ref;
    // General anchor: p/m = alpha' c1 + (c0/alpha) c2 at t_ref. With the
    // plain-Gaussian anchor (alpha' = 0) this is p alpha / (2 hbar m).
    let c2 = (p_ref / params.mass - alpha_dot_ref * c1) * alpha_ref / c0;
    Ok(AxisTrajectory {
        sol,
        t_ref,
        q_ref,
        p_ref,
        alpha_ref,
        alpha_dot_ref,
        c1,
        c2,
        excursion,
    })
}

/// Integrate the joint Ermakov system from `t0` to `t1` (backward when
/// `t1 < t0`). The classical trajectory is reconstructed from the
/// amplitude-phase decomposition, not integrated separately.
pub fn integrate_ermakov<T: Real>(
    params: &OscillatorParams<T>,
    init: &ErmakovInit<T>,
    t0: T,
    t1: T,
    opts: &OdeOptions<T>,
) -> Result<GuidingTrajectory<T>> {
    params.validate()?;
    let mk = |axis: Axis| {
        integrate_axis(
            params,
            axis,
            init.q0.get(axis),
            init.p0.get(axis),
            init.alpha0.get(axis),
            init.alpha_dot0.get(axis),
            t0,
            t1,
            opts,
        )
    };
    Ok(GuidingTrajectory { params: *params, axes: [mk(Axis::X)?, mk(Axis::Y)?] })
}

/// Solve for the trajectory hitting (`r_f`, `p_f`) at `t_f` exactly, evolved
/// backward to `t_back`. The amplitude anchor sits at `t_f` with zero slope,
/// which is the profile of a plain Gaussian postselected state.
pub fn backward_trajectory<T: Real>(
    params: &OscillatorParams<T>,
    r_f: Vec2<T>,
    p_f: Vec2<T>,
    alpha_f: Vec2<T>,
    t_f: T,
    t_back: T,
    opts: &OdeOptions<T>,
) -> Result<GuidingTrajectory<T>> {
    let init = ErmakovInit { q0: r_f, p0: p_f, alpha0: alpha_f, alpha_dot0: Vec2::zero() };
    integrate_ermakov(params, &init, t_f, t_back, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AxisPotential;

    fn static_params() -> OscillatorParams<f64> {
        OscillatorParams::isotropic_static(1.0).unwrap()
    }

    #[test]
    fn static_fixed_point_is_constant() {
        let params = static_params();
        let alpha0 = 2.0f64.sqrt();
        let init = ErmakovInit::uniform(Vec2::zero(), Vec2::new(1.0, 0.0), alpha0);
        let traj = integrate_ermakov(&params, &init, 0.0, 10.0, &OdeOptions::default()).unwrap();
        for i in 0..50 {
            let t = 10.0 * i as f64 / 49.0;
            let s = traj.state_at(Axis::X, t).unwrap();
            assert!((s.alpha - alpha0).abs() < 1e-10, "alpha drift {:e}", (s.alpha - alpha0).abs());
            assert!((s.phi - t).abs() < 1e-9, "phi(t)=t fails: {:e}", (s.phi - t).abs());
            assert!((s.q - t.sin()).abs() < 1e-9);
            assert!((s.p - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_is_monotone() {
        let params = OscillatorParams::new(
            1.0,
            1.0,
            AxisPotential { v: 1.0, kappa: 0.2, omega: 1.0 },
            AxisPotential { v: 1.0, kappa: 0.2, omega: 1.0 },
        )
        .unwrap();
        let init = ErmakovInit::uniform(Vec2::new(0.3, -0.2), Vec2::new(1.0, 0.5), 2.0f64.sqrt());
        let traj = integrate_ermakov(&params, &init, 0.0, 4.0 * std::f64::consts::PI, &OdeOptions::default()).unwrap();
        let states = traj.axis(Axis::X).node_states(&traj.params);
        for w in states.windows(2) {
            assert!(w[1].phi > w[0].phi);
        }
    }

    #[test]
    fn backward_hits_final_conditions_exactly() {
        let params = static_params();
        let tf = std::f64::consts::PI;
        let traj = backward_trajectory(
            &params,
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0f64.sqrt(), 2.0f64.sqrt()),
            tf,
            0.0,
            &OdeOptions::default(),
        )
        .unwrap();
        let s = traj.state_at(Axis::X, tf).unwrap();
        assert_eq!(s.q, 0.0);
        assert_eq!(s.p, 1.0);
        // q_x(t) = sin(t - pi); time-translation symmetry of the static axis.
        let s0 = traj.state_at(Axis::X, 0.0).unwrap();
        assert!(s0.q.abs() < 1e-9, "q_x(0) = {:e}", s0.q);
        let (lo, hi) = traj.span();
        assert!(lo <= 1e-12 && (hi - tf).abs() < 1e-12);
    }

    #[test]
    fn out_of_span_query_errors() {
        let params = static_params();
        let init = ErmakovInit::uniform(Vec2::zero(), Vec2::new(1.0, 0.0), 2.0f64.sqrt());
        let traj = integrate_ermakov(&params, &init, 0.0, 1.0, &OdeOptions::default()).unwrap();
        assert!(matches!(traj.state_at(Axis::X, 2.0), Err(CoreError::OutOfRange { .. })));
    }

    #[test]
    fn invalid_alpha_rejected() {
        let params = static_params();
        let init = ErmakovInit::uniform(Vec2::zero(), Vec2::zero(), -1.0);
        assert!(integrate_ermakov(&params, &init, 0.0, 1.0, &OdeOptions::default()).is_err());
    }
}
