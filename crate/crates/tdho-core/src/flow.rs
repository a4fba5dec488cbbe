//! Probability current, local velocity field, quantum potential, Bohmian
//! streamline integration and ensemble statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::ode::{self, OdeOptions};
use crate::quadrature::{gauss_legendre, Rect};
use crate::real::Real;
use crate::vec2::{Axis, Vec2};
use crate::wavepacket::{FrozenState, Superposition};

/// Streamline integration controls.
#[derive(Clone, Debug)]
pub struct BohmianControls<T> {
    pub rtol: T,
    pub atol: T,
    /// Cap on position displacement per accepted step. `None` picks
    /// 0.01 * alpha_ref of the narrowest branch axis.
    pub max_displacement: Option<T>,
    /// Cap on the time step; bounds the sample spacing when recorded
    /// velocities feed finite differences.
    pub max_step: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for BohmianControls<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-10),
            atol: T::of(1e-12),
            max_displacement: None,
            max_step: None,
            max_steps: 2_000_000,
        }
    }
}

/// Why a streamline stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    TimeReached,
    /// Entered a node neighbourhood (density below floor); stopped at the
    /// last good state, never extrapolated.
    SingularRegion { t: f64 },
    StepFailure { t: f64, detail: String },
}

#[derive(Clone, Copy, Debug)]
pub struct BohmianSample<T> {
    pub t: T,
    pub r: Vec2<T>,
    pub v: Vec2<T>,
}

/// One integrated streamline.
#[derive(Clone, Debug)]
pub struct BohmianTrajectory<T> {
    pub start: Vec2<T>,
    pub t0: T,
    /// Time-ordered samples in integration direction; velocities are field
    /// evaluations at the sample points.
    pub samples: Vec<BohmianSample<T>>,
    pub termination: Termination,
}

impl<T: Real> BohmianTrajectory<T> {
    pub fn end(&self) -> &BohmianSample<T> {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn reached(&self) -> bool {
        self.termination == Termination::TimeReached
    }
}

/// Seeded ensemble of streamlines transported from a density sample.
#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    pub seed: u64,
    pub initial: Vec<Vec2<T>>,
    pub trajectories: Vec<BohmianTrajectory<T>>,
}

/// Probability current j = (hbar/m) Im(conj(psi) grad psi).
pub fn current_density<T: Real>(state: &Superposition<T>, r: Vec2<T>, t: T) -> Result<Vec2<T>> {
    Ok(current_at(&state.frozen_at(t)?, r))
}

pub fn current_at<T: Real>(frozen: &FrozenState<T>, r: Vec2<T>) -> Vec2<T> {
    let f = frozen.field(r);
    let scale = frozen.hbar_over_mass();
    Vec2::new(
        (f.value.conj() * f.gradient.x).im * scale,
        (f.value.conj() * f.gradient.y).im * scale,
    )
}

/// Local velocity v = j / rho = Im(hbar grad psi / (m psi)). Undefined below
/// the density floor.
pub fn velocity_field<T: Real>(state: &Superposition<T>, r: Vec2<T>, t: T) -> Result<Vec2<T>> {
    velocity_at(&state.frozen_at(t)?, r)
}

pub fn velocity_at<T: Real>(frozen: &FrozenState<T>, r: Vec2<T>) -> Result<Vec2<T>> {
    let f = frozen.field(r);
    let rho = f.value.norm_sqr();
    if rho < frozen.density_floor() {
        return Err(singular(frozen, r, rho));
    }
    let scale = frozen.hbar_over_mass();
    Ok(Vec2::new((f.gradient.x / f.value).im * scale, (f.gradient.y / f.value).im * scale))
}

/// Q = -(hbar^2 / 2m) lap(sqrt rho) / sqrt(rho), evaluated analytically via
/// lap(R)/R = Re(lap psi / psi) + (Im(grad psi / psi))^2 for psi = R e^{iS/hbar}.
pub fn quantum_potential<T: Real>(state: &Superposition<T>, r: Vec2<T>, t: T) -> Result<T> {
    quantum_potential_at(&state.frozen_at(t)?, r)
}

pub fn quantum_potential_at<T: Real>(frozen: &FrozenState<T>, r: Vec2<T>) -> Result<T> {
    let f = frozen.field(r);
    let rho = f.value.norm_sqr();
    if rho < frozen.density_floor() {
        return Err(singular(frozen, r, rho));
    }
    let gx = f.gradient.x / f.value;
    let gy = f.gradient.y / f.value;
    let lap_over = f.laplacian / f.value;
    let curvature = lap_over.re + gx.im * gx.im + gy.im * gy.im;
    let (m, hbar) = frozen.mass_hbar();
    Ok(-hbar * hbar / (T::two() * m) * curvature)
}

/// grad(Q), analytic (third derivatives of psi).
pub fn quantum_force_gradient<T: Real>(frozen: &FrozenState<T>, r: Vec2<T>) -> Result<Vec2<T>> {
    let jet = frozen.jet(r);
    let rho = jet.value.norm_sqr();
    if rho < frozen.density_floor() {
        return Err(singular(frozen, r, rho));
    }
    let v = jet.value;
    let g = [jet.gradient.x / v, jet.gradient.y / v];
    let lap_over = jet.laplacian / v;
    // dg[i][j] = d_i (d_j psi / psi) = H_ij / psi - g_i g_j.
    let h = [
        [jet.hessian[0] / v, jet.hessian[1] / v],
        [jet.hessian[1] / v, jet.hessian[2] / v],
    ];
    let grad_lap = [jet.grad_laplacian.x / v, jet.grad_laplacian.y / v];
    let (m, hbar) = frozen.mass_hbar();
    let scale = -hbar * hbar / (T::two() * m);
    let mut out = [T::zero(); 2];
    for i in 0..2 {
        let d_lap = grad_lap[i] - lap_over * g[i];
        let mut im_term = T::zero();
        for j in 0..2 {
            let dg_ij = h[i][j] - g[i] * g[j];
            im_term = im_term + g[j].im * dg_ij.im;
        }
        out[i] = scale * (d_lap.re + T::two() * im_term);
    }
    Ok(Vec2::new(out[0], out[1]))
}

fn singular<T: Real>(frozen: &FrozenState<T>, r: Vec2<T>, rho: T) -> CoreError {
    CoreError::SingularRegion {
        x: r.x.to_f64().unwrap_or(f64::NAN),
        y: r.y.to_f64().unwrap_or(f64::NAN),
        t: frozen.t.to_f64().unwrap_or(f64::NAN),
        rho: rho.to_f64().unwrap_or(f64::NAN),
        floor: frozen.density_floor().to_f64().unwrap_or(f64::NAN),
    }
}

fn default_displacement_cap<T: Real>(state: &Superposition<T>) -> T {
    let mut alpha_min = T::infinity();
    for b in state.branches() {
        for axis in Axis::BOTH {
            alpha_min = alpha_min.min(b.traj.axis(axis).alpha_ref);
        }
    }
    alpha_min * T::of(0.01)
}

/// Integrate dr/dt = v(r, t) from (`x0`, `t0`) to `t1` (either direction).
/// Node neighbourhoods stop the streamline with the reason recorded.
pub fn integrate_bohmian<T: Real>(
    state: &Superposition<T>,
    x0: Vec2<T>,
    t0: T,
    t1: T,
    controls: &BohmianControls<T>,
) -> Result<BohmianTrajectory<T>> {
    let rho0 = state.density(x0, t0)?;
    if rho0.singular {
        return Err(CoreError::SingularRegion {
            x: x0.x.to_f64().unwrap_or(f64::NAN),
            y: x0.y.to_f64().unwrap_or(f64::NAN),
            t: t0.to_f64().unwrap_or(f64::NAN),
            rho: rho0.rho.to_f64().unwrap_or(f64::NAN),
            floor: f64::NAN,
        });
    }

    let cap = controls.max_displacement.unwrap_or_else(|| default_displacement_cap(state));
    let opts = OdeOptions {
        rtol: controls.rtol,
        atol: controls.atol,
        max_displacement: Some(cap),
        max_step: controls.max_step,
        max_steps: controls.max_steps,
        ..OdeOptions::default()
    };

    // The right-hand side must stay total for trial stage points that may
    // graze a node: inside the floor the velocity is frozen to zero and the
    // accepted-step monitor stops the integration without committing.
    let rhs = |t: T, y: &[T; 2]| {
        let r = Vec2::new(y[0], y[1]);
        match state.frozen_at(t) {
            Ok(frozen) => match velocity_at(&frozen, r) {
                Ok(v) => [v.x, v.y],
                Err(_) => [T::zero(), T::zero()],
            },
            Err(_) => [T::zero(), T::zero()],
        }
    };
    let monitor = |t: T, y: &[T; 2]| {
        let frozen = match state.frozen_at(t) {
            Ok(f) => f,
            Err(_) => return Some(()),
        };
        let rho = frozen.density(Vec2::new(y[0], y[1]));
        (rho < frozen.density_floor()).then_some(())
    };

    let integration = ode::integrate_monitored(rhs, t0, [x0.x, x0.y], t1, &opts, monitor);
    let (sol, halt, termination) = match integration {
        Ok((sol, Some(h))) => (sol, Some(h.t), Termination::SingularRegion { t: h.t }),
        Ok((sol, None)) => (sol, None, Termination::TimeReached),
        Err(CoreError::StepFailure { t, detail }) => {
            return Ok(BohmianTrajectory {
                start: x0,
                t0,
                samples: vec![sample_at(state, x0, t0)?],
                termination: Termination::StepFailure { t, detail },
            })
        }
        Err(e) => return Err(e),
    };
    let _ = halt;

    let mut samples = Vec::new();
    for (t, y) in sol.nodes() {
        let r = Vec2::new(y[0], y[1]);
        let v = state
            .frozen_at(t)
            .ok()
            .and_then(|f| velocity_at(&f, r).ok())
            .unwrap_or_else(Vec2::zero);
        samples.push(BohmianSample { t, r, v });
    }
    Ok(BohmianTrajectory { start: x0, t0, samples, termination })
}

fn sample_at<T: Real>(state: &Superposition<T>, r: Vec2<T>, t: T) -> Result<BohmianSample<T>> {
    let v = velocity_field(state, r, t)?;
    Ok(BohmianSample { t, r, v })
}

/// Residual of m dv/dt + grad(V + Q) along a recorded streamline; dv/dt from
/// a three-point nonuniform difference of the recorded velocities, grad Q
/// analytic. Returns (t, residual vector) at interior samples.
pub fn newton_residual<T: Real>(
    state: &Superposition<T>,
    traj: &BohmianTrajectory<T>,
) -> Result<Vec<(T, Vec2<T>)>> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Ok(Vec::new());
    }
    let m = state.params.mass;
    let mut out = Vec::with_capacity(s.len() - 2);
    for i in 1..s.len() - 1 {
        let (a, b, c) = (&s[i - 1], &s[i], &s[i + 1]);
        let h1 = b.t - a.t;
        let h2 = c.t - b.t;
        // Exact for quadratics on a nonuniform 3-point stencil.
        let dv = |f0: T, f1: T, f2: T| {
            (f2 * h1 * h1 - f0 * h2 * h2 + f1 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h1 + h2))
        };
        let dvdt = Vec2::new(dv(a.v.x, b.v.x, c.v.x), dv(a.v.y, b.v.y, c.v.y));
        let frozen = state.frozen_at(b.t)?;
        let grad_q = quantum_force_gradient(&frozen, b.r)?;
        let grad_v = Vec2::new(
            state.params.potential_gradient_coeff(Axis::X, b.t) * b.r.x,
            state.params.potential_gradient_coeff(Axis::Y, b.t) * b.r.y,
        );
        out.push((b.t, dvdt * m + grad_v + grad_q));
    }
    Ok(out)
}

/// Draw `n` points from rho(., t) / ||psi||^2 by rejection against the
/// branch-envelope Gaussian mixture. Deterministic for a given seed.
pub fn sample_density<T: Real>(
    state: &Superposition<T>,
    t: T,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec2<T>>> {
    let frozen = state.frozen_at(t)?;
    let nb = frozen.branch_count();
    let mut abs_weights = Vec::with_capacity(nb);
    let mut total_abs = T::zero();
    for j in 0..nb {
        let w = frozen.weight(j).norm();
        abs_weights.push(w);
        total_abs = total_abs + w;
    }
    // rho(r) <= total_abs * sum_J |a_J| rho_J(r) by Cauchy-Schwarz, so the
    // acceptance ratio against the mixture g = sum (|a_J|/total_abs) rho_J
    // is rho / (total_abs^2 g) <= 1.
    let bound = total_abs * total_abs;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let max_attempts = n.saturating_mul(100_000).max(1_000_000);
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CoreError::InvalidParameter(
                "rejection sampling efficiency collapsed".into(),
            ));
        }
        // Pick a branch proportional to |a_J|.
        let u = T::of(rng.gen::<f64>()) * total_abs;
        let mut j = nb - 1;
        let mut acc = T::zero();
        for (idx, w) in abs_weights.iter().enumerate() {
            acc = acc + *w;
            if u < acc {
                j = idx;
                break;
            }
        }
        // Per-axis normal draw around the branch center; rho_J has variance
        // alpha^2 / (4 m) per axis.
        let (g0, g1) = gaussian_pair(&mut rng);
        let sx = frozen.branch_state(j, Axis::X);
        let sy = frozen.branch_state(j, Axis::Y);
        let m = state.params.mass;
        let sig_x = sx.alpha / (T::two() * m.sqrt());
        let sig_y = sy.alpha / (T::two() * m.sqrt());
        let r = Vec2::new(sx.q + sig_x * T::of(g0), sy.q + sig_y * T::of(g1));

        // Mixture envelope density at r.
        let mut g = T::zero();
        for (k, w) in abs_weights.iter().enumerate() {
            g = g + *w / total_abs * frozen.branch_density_normalized(k, r);
        }
        let rho = frozen.density(r);
        let accept = rho / (bound * g);
        if T::of(rng.gen::<f64>()) < accept {
            out.push(r);
        }
    }
    Ok(out)
}

fn gaussian_pair(rng: &mut ChaCha12Rng) -> (f64, f64) {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 1e-300 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}

/// Outcome of an equivariance run: transported-sample histogram vs the
/// closed-form density at the target time.
#[derive(Clone, Debug)]
pub struct EquivarianceReport<T> {
    /// Binned L1 distance between the empirical mass and the quantum mass,
    /// including the out-of-box bucket.
    pub l1: T,
    pub n_transported: usize,
    pub n_failed: usize,
    pub grid: (usize, usize),
    pub rect: Rect<T>,
}

/// Histogram extent multiplier: branch centers at the target time padded by
/// this many packet widths per side. Coarse enough cells keep the N=2000
/// shot noise inside the shipped bounds.
pub const EQUIVARIANCE_BOX_SIGMAS: f64 = 24.0;

/// Transport `n` density samples Bohmian-wise from t0 to t1 and compare the
/// empirical histogram with rho(., t1) on an `nx` by `ny` grid.
pub fn equivariance_check<T: Real>(
    state: &Superposition<T>,
    n: usize,
    t0: T,
    t1: T,
    seed: u64,
    grid: (usize, usize),
    controls: &BohmianControls<T>,
) -> Result<EquivarianceReport<T>> {
    if n < 100 {
        return Err(CoreError::InvalidParameter("equivariance check needs n >= 100".into()));
    }
    let starts = sample_density(state, t0, n, seed)?;

    let (finals, n_failed) = if t1 == t0 {
        (starts.clone(), 0usize)
    } else {
        let results: Vec<Option<Vec2<T>>> = starts
            .par_iter()
            .map(|&r0| {
                integrate_bohmian(state, r0, t0, t1, controls)
                    .ok()
                    .filter(|tr| tr.reached())
                    .map(|tr| tr.end().r)
            })
            .collect();
        let n_failed = results.iter().filter(|r| r.is_none()).count();
        (results.into_iter().flatten().collect(), n_failed)
    };
    let mut report = histogram_l1(state, &finals, t1, grid)?;
    report.n_failed = n_failed;
    Ok(report)
}

/// Binned L1 distance between a set of transported points and rho(., t1).
pub fn histogram_l1<T: Real>(
    state: &Superposition<T>,
    finals: &[Vec2<T>],
    t1: T,
    grid: (usize, usize),
) -> Result<EquivarianceReport<T>> {
    // Histogram box: branch centers at t1 padded by packet widths.
    let frozen = state.frozen_at(t1)?;
    let m = state.params.mass;
    let mut rect: Option<Rect<T>> = None;
    for j in 0..frozen.branch_count() {
        let c = frozen.branch_center(j);
        let pad = T::of(EQUIVARIANCE_BOX_SIGMAS)
            * (frozen.branch_state(j, Axis::X).alpha.max(frozen.branch_state(j, Axis::Y).alpha))
            / (T::two() * m.sqrt());
        let b = Rect::centered(c, pad);
        rect = Some(match rect {
            None => b,
            Some(r) => r.union(&b),
        });
    }
    let rect = rect.expect("at least one branch");

    let (nx, ny) = grid;
    let dx = (rect.hi.x - rect.lo.x) / T::of(nx as f64);
    let dy = (rect.hi.y - rect.lo.y) / T::of(ny as f64);

    // Empirical masses.
    let n_eff = finals.len();
    let mut counts = vec![0usize; nx * ny];
    let mut outside = 0usize;
    for r in finals {
        let ix = ((r.x - rect.lo.x) / dx).floor().to_f64().unwrap_or(-1.0);
        let iy = ((r.y - rect.lo.y) / dy).floor().to_f64().unwrap_or(-1.0);
        if ix >= 0.0 && iy >= 0.0 && (ix as usize) < nx && (iy as usize) < ny {
            counts[iy as usize * nx + ix as usize] += 1;
        } else {
            outside += 1;
        }
    }

    // Quantum masses per cell by a fixed 5x5 Gauss panel; normalize by the
    // exact total norm so weights need not be normalized.
    let norm = state.total_norm(t1)?;
    let rule = gauss_legendre::<T>(5);
    let cell_masses: Vec<T> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let x0 = rect.lo.x + dx * T::of(ix as f64);
            let y0 = rect.lo.y + dy * T::of(iy as f64);
            let mut acc = T::zero();
            for &(xi, wx) in &rule {
                let x = x0 + dx * (xi + T::one()) * T::half();
                for &(yi, wy) in &rule {
                    let y = y0 + dy * (yi + T::one()) * T::half();
                    acc = acc + frozen.density(Vec2::new(x, y)) * wx * wy;
                }
            }
            acc * dx * dy / T::of(4.0) / norm
        })
        .collect();

    let inside_mass: T = cell_masses.iter().fold(T::zero(), |a, &b| a + b);
    let outside_mass = (T::one() - inside_mass).max(T::zero());

    let nf = T::of(n_eff.max(1) as f64);
    let mut l1 = (T::of(outside as f64) / nf - outside_mass).abs();
    for (count, mass) in counts.iter().zip(cell_masses.iter()) {
        l1 = l1 + (T::of(*count as f64) / nf - *mass).abs();
    }

    Ok(EquivarianceReport { l1, n_transported: n_eff, n_failed: 0, grid, rect })
}

/// Convenience: sample + transport, returning the full ensemble.
pub fn transport_ensemble<T: Real>(
    state: &Superposition<T>,
    n: usize,
    t0: T,
    t1: T,
    seed: u64,
    controls: &BohmianControls<T>,
) -> Result<Ensemble<T>> {
    let initial = sample_density(state, t0, n, seed)?;
    let trajectories: Vec<BohmianTrajectory<T>> = initial
        .par_iter()
        .map(|&r0| {
            integrate_bohmian(state, r0, t0, t1, controls).unwrap_or_else(|e| BohmianTrajectory {
                start: r0,
                t0,
                samples: vec![BohmianSample { t: t0, r: r0, v: Vec2::zero() }],
                termination: Termination::StepFailure { t: t0.to_f64().unwrap_or(f64::NAN), detail: e.to_string() },
            })
        })
        .collect();
    Ok(Ensemble { seed, initial, trajectories })
}
