//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use num_complex::Complex64;
use tdho_core::ermakov::{integrate_ermakov, ErmakovInit, GuidingTrajectory};
use tdho_core::ode::{integrate, DenseOutput, OdeOptions};
use tdho_core::params::{AxisPotential, OscillatorParams};
use tdho_core::vec2::{Axis, Vec2};
use tdho_core::wavepacket::Superposition;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;
pub const PI: f64 = std::f64::consts::PI;

pub fn static_params() -> OscillatorParams<f64> {
    OscillatorParams::isotropic_static(1.0).unwrap()
}

pub fn mathieu_params(v: f64, kappa: f64, omega: f64) -> OscillatorParams<f64> {
    OscillatorParams::new(
        1.0,
        1.0,
        AxisPotential { v, kappa, omega },
        AxisPotential { v, kappa, omega },
    )
    .unwrap()
}

pub fn branch(
    params: &OscillatorParams<f64>,
    q0: Vec2<f64>,
    p0: Vec2<f64>,
    alpha0: f64,
    t0: f64,
    t1: f64,
) -> GuidingTrajectory<f64> {
    let init = ErmakovInit::uniform(q0, p0, alpha0);
    integrate_ermakov(params, &init, t0, t1, &OdeOptions::default()).unwrap()
}

pub fn single_state(
    params: &OscillatorParams<f64>,
    p0: Vec2<f64>,
    t1: f64,
) -> Superposition<f64> {
    let traj = branch(params, Vec2::zero(), p0, SQRT2, 0.0, t1);
    Superposition::new(*params, vec![(1.0, traj)]).unwrap()
}

/// Two mirror-image branches crossing at the origin every pi: p0 = (2, +-2).
pub fn mirror_pair_state(t1: f64) -> Superposition<f64> {
    let params = static_params();
    let w = 1.0 / 2.0f64.sqrt();
    let b1 = branch(&params, Vec2::zero(), Vec2::new(2.0, 2.0), SQRT2, 0.0, t1);
    let b2 = branch(&params, Vec2::zero(), Vec2::new(2.0, -2.0), SQRT2, 0.0, t1);
    Superposition::new(params, vec![(w, b1), (w, b2)]).unwrap()
}

/// Two branches with incommensurate-looking but rationally locked axis
/// frequencies (omega_x = 3.5, omega_y = 0.5): branch 1 traces
/// (sin 3.5t, 7 sin 0.5t) and first returns to the origin at t = 2 pi,
/// branch 2 runs along (2 sin 3.5t, 0) and revisits it every 2 pi / 7.
/// Seven recurrence peaks in (0, 2 pi].
pub fn two_branch_state(t1: f64) -> Superposition<f64> {
    let params = OscillatorParams::new(
        1.0,
        1.0,
        AxisPotential::static_axis(12.25),
        AxisPotential::static_axis(0.25),
    )
    .unwrap();
    let b1 = branch(&params, Vec2::zero(), Vec2::new(3.5, 3.5), SQRT2, 0.0, t1);
    let b2 = branch(&params, Vec2::zero(), Vec2::new(7.0, 0.0), SQRT2, 0.0, t1);
    Superposition::new(params, vec![(1.0, b1), (1.0, b2)])
        .unwrap()
        .normalized(0.0)
        .unwrap()
}

/// Three branches leaving the origin at |p0| = 6, all returning at t = pi.
pub fn three_branch_state(t1: f64) -> Superposition<f64> {
    let params = static_params();
    let w = 1.0 / 3.0f64.sqrt();
    let dirs = [90.0f64, 210.0, 330.0];
    let parts = dirs
        .iter()
        .map(|deg| {
            let th = deg.to_radians();
            let p0 = Vec2::new(6.0 * th.cos(), 6.0 * th.sin());
            (w, branch(&params, Vec2::zero(), p0, SQRT2, 0.0, t1))
        })
        .collect();
    Superposition::new(params, parts).unwrap()
}

/// Independent oracle: integrate the classical equation q'' + V(t) q = 0
/// directly as a first-order system with dense output.
pub fn direct_classical(
    params: &OscillatorParams<f64>,
    axis: Axis,
    q0: f64,
    p0: f64,
    t0: f64,
    t1: f64,
) -> DenseOutput<f64, 2> {
    let p = *params;
    let m = params.mass;
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..OdeOptions::default() };
    integrate(
        move |t: f64, y: &[f64; 2]| [y[1] / m, -p.potential_gradient_coeff(axis, t) * y[0]],
        t0,
        [q0, p0],
        t1,
        &opts,
    )
    .unwrap()
}

/// Independent oracle: split-step Fourier propagation of the 1D oscillator
/// TDSE on a uniform grid. Returns the grid and the final wavefunction.
pub struct SplitStepResult {
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
}

pub fn split_step_1d(
    params: &OscillatorParams<f64>,
    axis: Axis,
    psi0: impl Fn(f64) -> Complex64,
    half_width: f64,
    n: usize,
    t0: f64,
    t1: f64,
    dt: f64,
) -> SplitStepResult {
    use rustfft::FftPlanner;

    let m = params.mass;
    let hbar = params.hbar;
    let dx = 2.0 * half_width / n as f64;
    let x: Vec<f64> = (0..n).map(|i| -half_width + dx * i as f64).collect();
    let mut psi: Vec<Complex64> = x.iter().map(|&xi| psi0(xi)).collect();

    // FFT wavenumbers.
    let mut k = vec![0.0f64; n];
    for (i, ki) in k.iter_mut().enumerate() {
        let idx = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        *ki = 2.0 * PI * idx / (n as f64 * dx);
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let steps = ((t1 - t0) / dt).round() as usize;
    let dt = (t1 - t0) / steps as f64;
    let mut t = t0;
    for _ in 0..steps {
        // Strang splitting with the potential frozen at the step midpoint.
        let vt = t + 0.5 * dt;
        for (p, &xi) in psi.iter_mut().zip(&x) {
            let v = 0.5 * m * params.potential(axis, vt) * xi * xi;
            *p *= Complex64::new(0.0, -v * dt / (2.0 * hbar)).exp();
        }
        fft.process(&mut psi);
        for (p, &ki) in psi.iter_mut().zip(&k) {
            let kin = hbar * ki * ki / (2.0 * m);
            *p *= Complex64::new(0.0, -kin * dt).exp() / n as f64;
        }
        ifft.process(&mut psi);
        for (p, &xi) in psi.iter_mut().zip(&x) {
            let v = 0.5 * m * params.potential(axis, vt) * xi * xi;
            *p *= Complex64::new(0.0, -v * dt / (2.0 * hbar)).exp();
        }
        t += dt;
    }
    SplitStepResult { x, psi }
}

/// Deterministic low-discrepancy-ish sample points in a rectangle
/// (plain seeded uniforms).
pub fn seeded_points(
    seed: u64,
    n: usize,
    lo: Vec2<f64>,
    hi: Vec2<f64>,
) -> Vec<Vec2<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            Vec2::new(lo.x + (hi.x - lo.x) * u, lo.y + (hi.y - lo.y) * v)
        })
        .collect()
}
