//! Closed-form Gaussian wavepackets of the driven oscillator and their
//! superpositions, with analytic derivatives.
//!
//! Per axis, a branch anchored at (q_ref, p_ref, alpha_ref) evaluates to
//!
//! ```text
//!   psi(x, t) = (2m / (pi alpha^2))^{1/4}
//!               * exp( -[x - q]^2 (m/alpha^2 - i m alpha'/(2 hbar alpha)) )
//!               * exp( i p (x - q) / hbar )
//!               * exp( i (p q - p_ref q_ref) / (2 hbar) )
//!               * exp( -i (phi - phi_ref) / 2 ),
//! ```
//!
//! where (q, p, alpha, alpha', phi) is the joint Ermakov state. The 2D packet
//! is the product of its axes, and superpositions are weighted sums. Because
//! each factor is a Gaussian exponential, values, derivatives to third order
//! and all inner products stay closed-form.

pub mod propagator;

use crate::complex_gaussian::GaussExp;
use crate::ermakov::{ErmakovState, GuidingTrajectory};
use crate::error::{CoreError, Result};
use crate::params::OscillatorParams;
use crate::real::{cr, im, Real, C};
use crate::vec2::{Axis, Vec2};

/// Fraction of the instantaneous peak-density bound below which a point
/// counts as a node neighbourhood.
pub const DENSITY_FLOOR_FRAC: f64 = 1e-12;

/// One Gaussian component of a superposition. The weight is complex so that
/// postselected states (and global-phase experiments) reuse the same type;
/// physical preselected states are built with real weights.
#[derive(Clone, Debug)]
pub struct GaussianBranch<T> {
    pub label: usize,
    pub weight: C<T>,
    pub traj: GuidingTrajectory<T>,
}

/// Value, gradient and Laplacian of the wavefunction at one point, all
/// analytic.
#[derive(Clone, Copy, Debug)]
pub struct ComplexField<T> {
    pub value: C<T>,
    pub gradient: Vec2<C<T>>,
    pub laplacian: C<T>,
}

/// Density with a node flag instead of an error.
#[derive(Clone, Copy, Debug)]
pub struct DensityInfo<T> {
    pub rho: T,
    /// True when rho is below the instantaneous density floor.
    pub singular: bool,
}

/// Per-axis frozen branch data at a fixed time: the complex width, center,
/// momentum and accumulated phase, ready for repeated evaluation in x.
#[derive(Clone, Copy, Debug)]
struct AxisGaussian<T> {
    /// Complex width coefficient M = m/alpha^2 - i m alpha' / (2 hbar alpha).
    m_width: C<T>,
    q: T,
    p_over_hbar: T,
    /// i Theta + ln(prefactor): everything x-independent.
    log_rest: C<T>,
}

impl<T: Real> AxisGaussian<T> {
    fn from_state(params: &OscillatorParams<T>, axis: &crate::ermakov::AxisTrajectory<T>, s: &ErmakovState<T>) -> Self {
        let m = params.mass;
        let hbar = params.hbar;
        let alpha = s.alpha;
        let m_width = C::new(m / (alpha * alpha), -m * s.alpha_dot / (T::two() * hbar * alpha));
        let theta = (s.p * s.q - axis.p_ref * axis.q_ref) / (T::two() * hbar) - s.phi * T::half();
        let prefactor = (T::two() * m / (T::PI() * alpha * alpha)).powf(T::of(0.25));
        AxisGaussian {
            m_width,
            q: s.q,
            p_over_hbar: s.p / hbar,
            log_rest: C::new(prefactor.ln(), theta),
        }
    }

    /// Derivatives of psi along this axis up to third order; the exponent is
    /// quadratic so G''' = 0 and everything reduces to G' and G''.
    #[inline]
    fn derivs(&self, x: T) -> [C<T>; 4] {
        let dx = x - self.q;
        let g = -self.m_width * (dx * dx) + im::<T>() * (self.p_over_hbar * dx) + self.log_rest;
        let g1 = -self.m_width * (T::two() * dx) + C::new(T::zero(), self.p_over_hbar);
        let g2 = -self.m_width * T::two();
        let v = g.exp();
        let d1 = g1 * v;
        let d2 = (g2 + g1 * g1) * v;
        let d3 = (g2 * g1 * T::of(3.0) + g1 * g1 * g1) * v;
        [v, d1, d2, d3]
    }

    /// Exponent in expanded exp(-a x^2 + b x + c) form, prefactor included.
    fn quadratic(&self) -> GaussExp<T> {
        let a = self.m_width;
        let ip = C::new(T::zero(), self.p_over_hbar);
        let b = a * (T::two() * self.q) + ip;
        let c = -a * (self.q * self.q) - ip * self.q + self.log_rest;
        GaussExp::new(a, b, c)
    }

    /// Largest |psi| along the axis (attained at the center).
    fn peak_abs(&self) -> T {
        self.log_rest.re.exp()
    }
}

/// All branches of a superposition frozen at one time. Freezing performs the
/// per-branch trajectory interpolation once; evaluating in r afterwards is
/// cheap, which matters inside quadratures and streamline integrations.
#[derive(Clone, Debug)]
pub struct FrozenState<T> {
    pub t: T,
    params: OscillatorParams<T>,
    weights: Vec<C<T>>,
    labels: Vec<usize>,
    axes: Vec<[AxisGaussian<T>; 2]>,
    states: Vec<[ErmakovState<T>; 2]>,
}

/// Field value plus second and third derivatives; what the quantum-force
/// evaluation needs.
#[derive(Clone, Copy, Debug)]
pub struct FieldJet<T> {
    pub value: C<T>,
    pub gradient: Vec2<C<T>>,
    pub laplacian: C<T>,
    /// Hessian entries (xx, xy, yy).
    pub hessian: [C<T>; 3],
    /// Gradient of the Laplacian.
    pub grad_laplacian: Vec2<C<T>>,
}

impl<T: Real> FrozenState<T> {
    pub fn branch_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, j: usize) -> C<T> {
        self.weights[j]
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    /// Joint Ermakov state of branch `j` on `axis` at the frozen time.
    pub fn branch_state(&self, j: usize, axis: Axis) -> &ErmakovState<T> {
        &self.states[j][axis.index()]
    }

    pub fn branch_center(&self, j: usize) -> Vec2<T> {
        Vec2::new(self.states[j][0].q, self.states[j][1].q)
    }

    pub fn branch_momentum(&self, j: usize) -> Vec2<T> {
        Vec2::new(self.states[j][0].p, self.states[j][1].p)
    }

    /// Expanded per-axis exponent of branch `j` (weight not included).
    pub fn branch_quadratic(&self, j: usize, axis: Axis) -> GaussExp<T> {
        self.axes[j][axis.index()].quadratic()
    }

    /// Value of branch `j` alone at r (weight included).
    pub fn branch_value(&self, j: usize, r: Vec2<T>) -> C<T> {
        let [vx, ..] = self.axes[j][0].derivs(r.x);
        let [vy, ..] = self.axes[j][1].derivs(r.y);
        vx * vy * self.weights[j]
    }

    pub fn value(&self, r: Vec2<T>) -> C<T> {
        let mut acc = C::new(T::zero(), T::zero());
        for j in 0..self.branch_count() {
            acc = acc + self.branch_value(j, r);
        }
        acc
    }

    pub fn field(&self, r: Vec2<T>) -> ComplexField<T> {
        let zero = C::new(T::zero(), T::zero());
        let mut value = zero;
        let mut gx = zero;
        let mut gy = zero;
        let mut lap = zero;
        for j in 0..self.branch_count() {
            let w = self.weights[j];
            let [x0, x1, x2, _] = self.axes[j][0].derivs(r.x);
            let [y0, y1, y2, _] = self.axes[j][1].derivs(r.y);
            value = value + x0 * y0 * w;
            gx = gx + x1 * y0 * w;
            gy = gy + x0 * y1 * w;
            lap = lap + (x2 * y0 + x0 * y2) * w;
        }
        ComplexField { value, gradient: Vec2::new(gx, gy), laplacian: lap }
    }

    pub fn jet(&self, r: Vec2<T>) -> FieldJet<T> {
        let zero = C::new(T::zero(), T::zero());
        let mut value = zero;
        let mut gx = zero;
        let mut gy = zero;
        let (mut hxx, mut hxy, mut hyy) = (zero, zero, zero);
        let (mut lx, mut ly) = (zero, zero);
        for j in 0..self.branch_count() {
            let w = self.weights[j];
            let [x0, x1, x2, x3] = self.axes[j][0].derivs(r.x);
            let [y0, y1, y2, y3] = self.axes[j][1].derivs(r.y);
            value = value + w * x0 * y0;
            gx = gx + w * x1 * y0;
            gy = gy + w * x0 * y1;
            hxx = hxx + w * x2 * y0;
            hxy = hxy + w * x1 * y1;
            hyy = hyy + w * x0 * y2;
            lx = lx + w * (x3 * y0 + x1 * y2);
            ly = ly + w * (x2 * y1 + x0 * y3);
        }
        FieldJet {
            value,
            gradient: Vec2::new(gx, gy),
            laplacian: hxx + hyy,
            hessian: [hxx, hxy, hyy],
            grad_laplacian: Vec2::new(lx, ly),
        }
    }

    pub fn density(&self, r: Vec2<T>) -> T {
        self.value(r).norm_sqr()
    }

    /// Upper bound on the density anywhere at this time, from the triangle
    /// inequality over branch peak amplitudes.
    pub fn peak_density_bound(&self) -> T {
        let mut amp = T::zero();
        for j in 0..self.branch_count() {
            amp = amp + self.weights[j].norm() * self.axes[j][0].peak_abs() * self.axes[j][1].peak_abs();
        }
        amp * amp
    }

    /// Density floor defining "singular region" at this time.
    pub fn density_floor(&self) -> T {
        self.peak_density_bound() * T::of(DENSITY_FLOOR_FRAC)
    }

    /// Number of branches whose packet reaches `r` with at least `frac` of
    /// their own peak amplitude; used to flag interference regions.
    pub fn branches_present(&self, r: Vec2<T>, frac: T) -> usize {
        let mut n = 0;
        for j in 0..self.branch_count() {
            let peak = self.axes[j][0].peak_abs() * self.axes[j][1].peak_abs();
            let [vx, ..] = self.axes[j][0].derivs(r.x);
            let [vy, ..] = self.axes[j][1].derivs(r.y);
            if (vx * vy).norm() >= frac * peak {
                n += 1;
            }
        }
        n
    }

    /// |psi_j(r)|^2 of the unit-norm branch alone, weight excluded.
    pub fn branch_density_normalized(&self, j: usize, r: Vec2<T>) -> T {
        let [vx, ..] = self.axes[j][0].derivs(r.x);
        let [vy, ..] = self.axes[j][1].derivs(r.y);
        (vx * vy).norm_sqr()
    }

    #[inline]
    pub fn hbar_over_mass(&self) -> T {
        self.params.hbar / self.params.mass
    }

    #[inline]
    pub fn mass_hbar(&self) -> (T, T) {
        (self.params.mass, self.params.hbar)
    }
}

/// Closed-form overlap <chi|psi> between two frozen states of the same
/// oscillator.
pub fn frozen_overlap<T: Real>(chi: &FrozenState<T>, psi: &FrozenState<T>) -> C<T> {
    let mut acc = C::new(T::zero(), T::zero());
    for k in 0..chi.branch_count() {
        for j in 0..psi.branch_count() {
            let ox = chi
                .branch_quadratic(k, Axis::X)
                .conj()
                .product(&psi.branch_quadratic(j, Axis::X))
                .moment0();
            let oy = chi
                .branch_quadratic(k, Axis::Y)
                .conj()
                .product(&psi.branch_quadratic(j, Axis::Y))
                .moment0();
            acc = acc + chi.weight(k).conj() * psi.weight(j) * ox * oy;
        }
    }
    acc
}

/// A weighted sum of Gaussian branches sharing one set of oscillator
/// parameters.
#[derive(Clone, Debug)]
pub struct Superposition<T> {
    pub params: OscillatorParams<T>,
    branches: Vec<GaussianBranch<T>>,
}

impl<T: Real> Superposition<T> {
    /// Build from real weights (the physical preselected-state form). Weights
    /// are taken as given; the state's exact norm (including branch cross
    /// terms) is reported by [`Superposition::total_norm`], never silently
    /// renormalized.
    pub fn new(params: OscillatorParams<T>, parts: Vec<(T, GuidingTrajectory<T>)>) -> Result<Self> {
        Self::with_complex_weights(
            params,
            parts.into_iter().map(|(w, tr)| (cr(w), tr)).collect(),
        )
    }

    /// Build with complex weights (postselected states, phase experiments).
    pub fn with_complex_weights(
        params: OscillatorParams<T>,
        parts: Vec<(C<T>, GuidingTrajectory<T>)>,
    ) -> Result<Self> {
        if parts.is_empty() {
            return Err(CoreError::InvalidParameter("superposition needs at least one branch".into()));
        }
        let branches = parts
            .into_iter()
            .enumerate()
            .map(|(label, (weight, traj))| GaussianBranch { label, weight, traj })
            .collect();
        Ok(Self { params, branches })
    }

    pub fn branches(&self) -> &[GaussianBranch<T>] {
        &self.branches
    }

    pub fn branch(&self, j: usize) -> &GaussianBranch<T> {
        &self.branches[j]
    }

    /// Copy of this state with every weight multiplied by `z` (e.g. a global
    /// phase).
    pub fn scaled(&self, z: C<T>) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.weight = b.weight * z;
        }
        out
    }

    /// Single branch extracted with unit weight.
    pub fn branch_state(&self, j: usize) -> Self {
        Self {
            params: self.params,
            branches: vec![GaussianBranch {
                label: self.branches[j].label,
                weight: cr(T::one()),
                traj: self.branches[j].traj.clone(),
            }],
        }
    }

    /// Intersection of the branch trajectory spans.
    pub fn span(&self) -> (T, T) {
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        for b in &self.branches {
            let (l, h) = b.traj.span();
            lo = lo.max(l);
            hi = hi.min(h);
        }
        (lo, hi)
    }

    /// Interpolate every branch at `t` once; the result evaluates cheaply at
    /// any position.
    pub fn frozen_at(&self, t: T) -> Result<FrozenState<T>> {
        let n = self.branches.len();
        let mut weights = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut axes = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for b in &self.branches {
            let sx = b.traj.state_at(Axis::X, t)?;
            let sy = b.traj.state_at(Axis::Y, t)?;
            let gx = AxisGaussian::from_state(&self.params, b.traj.axis(Axis::X), &sx);
            let gy = AxisGaussian::from_state(&self.params, b.traj.axis(Axis::Y), &sy);
            weights.push(b.weight);
            labels.push(b.label);
            axes.push([gx, gy]);
            states.push([sx, sy]);
        }
        Ok(FrozenState { t, params: self.params, weights, labels, axes, states })
    }

    /// psi, grad psi and lap psi at one space-time point.
    pub fn evaluate(&self, r: Vec2<T>, t: T) -> Result<ComplexField<T>> {
        Ok(self.frozen_at(t)?.field(r))
    }

    /// rho = |psi|^2 with the node flag.
    pub fn density(&self, r: Vec2<T>, t: T) -> Result<DensityInfo<T>> {
        let frozen = self.frozen_at(t)?;
        let rho = frozen.density(r);
        Ok(DensityInfo { rho, singular: rho < frozen.density_floor() })
    }

    /// grad rho / rho = 2 Re(grad psi / psi), with the node flag.
    pub fn grad_log_density(&self, r: Vec2<T>, t: T) -> Result<(Vec2<T>, DensityInfo<T>)> {
        let frozen = self.frozen_at(t)?;
        let field = frozen.field(r);
        let rho = field.value.norm_sqr();
        let info = DensityInfo { rho, singular: rho < frozen.density_floor() };
        if info.singular {
            return Ok((Vec2::zero(), info));
        }
        let ratio_x = field.gradient.x / field.value;
        let ratio_y = field.gradient.y / field.value;
        Ok((Vec2::new(T::two() * ratio_x.re, T::two() * ratio_y.re), info))
    }

    /// Exact total norm <psi|psi> including branch cross terms, closed form.
    pub fn total_norm(&self, t: T) -> Result<T> {
        let frozen = self.frozen_at(t)?;
        Ok(frozen_overlap(&frozen, &frozen).re)
    }

    /// Overlap <chi(t)|psi(t)> between two states of the same oscillator.
    pub fn overlap(chi: &Superposition<T>, psi: &Superposition<T>, t: T) -> Result<C<T>> {
        let fc = chi.frozen_at(t)?;
        let fp = psi.frozen_at(t)?;
        Ok(frozen_overlap(&fc, &fp))
    }

    /// Rescale all weights so the total norm (cross terms included) is one.
    /// The norm is conserved, so any time inside the span works.
    pub fn normalized(self, t: T) -> Result<Self> {
        let norm = self.total_norm(t)?;
        if !(norm > T::zero()) {
            return Err(CoreError::InvalidParameter("state has zero norm".into()));
        }
        Ok(self.scaled(cr(T::one() / norm.sqrt())))
    }
}
