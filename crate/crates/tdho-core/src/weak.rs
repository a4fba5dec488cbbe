//! Weak values of position (contact-window probes, arbitrary pre/post
//! selection) and momentum (position postselection), weak-trajectory
//! assembly, and the expectation-value decomposition over postselections.
//!
//! A probe at R0 with Gaussian window f(r) = exp(-|r - R0|^2 / w^2) registers
//! the window-normalized position weak value
//!
//! ```text
//!   <r>_W = <chi(t_k)| r f |psi(t_k)> / <chi(t_k)| f |psi(t_k)>,
//! ```
//!
//! which reproduces the probe location when chi = psi is centered on it and
//! the guiding position q^J(t_k) under branch-matched postselection, and is
//! exactly affine in the phase-space mismatch between the probed branch and
//! the backward-evolved postselection. The bare overlap <chi|psi> is kept on
//! every record: it decides compatibility, not the value normalization.
//! Everything is computed twice on demand -- closed-form Gaussian moments and
//! adaptive 2D quadrature over the wavefunctions -- and the routes must agree.

use rayon::prelude::*;

use crate::complex_gaussian::GaussExp;
use crate::ermakov::{backward_trajectory, GuidingTrajectory};
use crate::error::{CoreError, Result};
use crate::ode::OdeOptions;
use crate::quadrature::{integrate_2d, Rect};
use crate::real::{cr, im, Real, C};
use crate::vec2::{Axis, Vec2};
use crate::wavepacket::{frozen_overlap, FrozenState, Superposition};

/// Default window width as a fraction of the branch anchor width.
pub const WINDOW_WIDTH_FRAC: f64 = 0.25;

/// One contact-window probe: position, window width, interaction time.
#[derive(Clone, Copy, Debug)]
pub struct Wma<T> {
    pub id: usize,
    pub r0: Vec2<T>,
    pub width: T,
    pub t_k: T,
}

/// Thresholds deciding when a record counts as registering anything.
#[derive(Clone, Copy, Debug)]
pub struct WeakThresholds<T> {
    /// Compatibility floor on |<chi|psi>| for normalized states.
    pub compatibility: T,
    /// Floor on the windowed numerator/denominator magnitudes.
    pub numerator: T,
    /// Relative agreement required between analytic and quadrature routes.
    pub route_agreement: T,
    /// Branch-amplitude fraction above which a second branch at the probe
    /// position flags the record as sitting on an interference region.
    pub overlap_amplitude_frac: T,
}

impl<T: Real> Default for WeakThresholds<T> {
    fn default() -> Self {
        Self {
            compatibility: T::of(1e-8),
            numerator: T::of(1e-8),
            route_agreement: T::of(1e-6),
            overlap_amplitude_frac: T::of(1e-4),
        }
    }
}

/// How the final projective state is specified.
#[derive(Clone, Debug)]
pub enum PostselectionState<T> {
    /// Plain Gaussian packet centered at (r_f, p_f) with real-space width
    /// delta_f at the postselection time.
    GaussianPacket { r_f: Vec2<T>, p_f: Vec2<T>, delta_f: T, t_f: T },
    /// Exactly the J-th branch of the preselected state.
    BranchMatched { branch: usize },
    /// Sum of Gaussian packets sharing a center and width, one momentum per
    /// component; the tailored state used at trajectory crossings.
    MultiBranch { components: Vec<(C<T>, Vec2<T>)>, r_f: Vec2<T>, delta_f: T, t_f: T },
    /// Position eigenstate; only meaningful for momentum weak values, where
    /// the exact narrow-packet limit -i hbar grad psi / psi applies.
    PositionPoint { r_f: Vec2<T>, t: T },
}

impl<T: Real> PostselectionState<T> {
    /// The postselected state evolved backward to cover `[t_back, t_f]`,
    /// as a closed-form superposition. The packet width delta_f maps onto the
    /// amplitude anchor alpha(t_f) = delta_f sqrt(m), with zero slope.
    pub fn backward_state(
        &self,
        pre: &Superposition<T>,
        t_back: T,
        opts: &OdeOptions<T>,
    ) -> Result<Superposition<T>> {
        let params = pre.params;
        match self {
            PostselectionState::GaussianPacket { r_f, p_f, delta_f, t_f } => {
                if !(*delta_f > T::zero()) {
                    return Err(CoreError::InvalidParameter("delta_f must be positive".into()));
                }
                let alpha_f = *delta_f * params.mass.sqrt();
                let traj = backward_trajectory(
                    &params,
                    *r_f,
                    *p_f,
                    Vec2::new(alpha_f, alpha_f),
                    *t_f,
                    t_back,
                    opts,
                )?;
                Superposition::new(params, vec![(T::one(), traj)])
            }
            PostselectionState::BranchMatched { branch } => {
                if *branch >= pre.branches().len() {
                    return Err(CoreError::InvalidParameter(format!(
                        "branch {} out of range ({} branches)",
                        branch,
                        pre.branches().len()
                    )));
                }
                Ok(pre.branch_state(*branch))
            }
            PostselectionState::MultiBranch { components, r_f, delta_f, t_f } => {
                if components.is_empty()
                    || components.iter().all(|(c, _)| c.norm() == T::zero())
                {
                    return Err(CoreError::InvalidParameter(
                        "multi-branch postselection needs a nonzero coefficient".into(),
                    ));
                }
                if !(*delta_f > T::zero()) {
                    return Err(CoreError::InvalidParameter("delta_f must be positive".into()));
                }
                let alpha_f = *delta_f * params.mass.sqrt();
                let mut parts = Vec::with_capacity(components.len());
                for (c_k, p_f) in components {
                    let traj = backward_trajectory(
                        &params,
                        *r_f,
                        *p_f,
                        Vec2::new(alpha_f, alpha_f),
                        *t_f,
                        t_back,
                        opts,
                    )?;
                    parts.push((*c_k, traj));
                }
                Superposition::with_complex_weights(params, parts)
            }
            PostselectionState::PositionPoint { .. } => Err(CoreError::InvalidParameter(
                "position-eigenstate postselection has no Gaussian backward form; \
                 use weak_momentum_value"
                    .into(),
            )),
        }
    }
}

/// How a record was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Analytic,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    /// Nothing registered: windowed numerator and response both below floor.
    Vanishing,
    /// Windowed response below floor while the numerator is not; the stored
    /// value is numerically untrustworthy.
    IllConditioned,
}

/// The complex position weak value registered by one probe.
#[derive(Clone, Debug)]
pub struct WeakValueRecord<T> {
    pub wma_id: usize,
    pub t_k: T,
    pub r0: Vec2<T>,
    /// Window-normalized weak value (zero for vanishing records).
    pub value: Vec2<C<T>>,
    /// Bare overlap <chi(t_k)|psi(t_k)>.
    pub normalization: C<T>,
    /// Windowed response <chi(t_k)|f|psi(t_k)>.
    pub windowed_overlap: C<T>,
    /// Filled by trajectory assembly.
    pub branch: Option<usize>,
    pub method: Method,
    pub status: RecordStatus,
    /// Probe sits where two or more preselected branches have support.
    pub overlap_flagged: bool,
}

impl<T: Real> WeakValueRecord<T> {
    pub fn vanishing(&self) -> bool {
        self.status == RecordStatus::Vanishing
    }

    /// Eligible for weak-trajectory assembly.
    pub fn assembly_eligible(&self) -> bool {
        self.status == RecordStatus::Ok && !self.overlap_flagged
    }
}

/// Raw windowed moments of one probe: numerators over x and y, the windowed
/// response and the bare overlap.
#[derive(Clone, Copy, Debug)]
struct Moments<T> {
    num: Vec2<C<T>>,
    den: C<T>,
    overlap: C<T>,
}

fn analytic_moments<T: Real>(chi: &FrozenState<T>, psi: &FrozenState<T>, wma: &Wma<T>) -> Moments<T> {
    let zero = C::new(T::zero(), T::zero());
    let (mut num_x, mut num_y, mut den, mut overlap) = (zero, zero, zero, zero);
    let win_x = GaussExp::window(wma.r0.x, wma.width);
    let win_y = GaussExp::window(wma.r0.y, wma.width);
    for k in 0..chi.branch_count() {
        for j in 0..psi.branch_count() {
            let w = chi.weight(k).conj() * psi.weight(j);
            let base_x = chi.branch_quadratic(k, Axis::X).conj().product(&psi.branch_quadratic(j, Axis::X));
            let base_y = chi.branch_quadratic(k, Axis::Y).conj().product(&psi.branch_quadratic(j, Axis::Y));
            overlap = overlap + w * base_x.moment0() * base_y.moment0();
            let wx = base_x.product(&win_x);
            let wy = base_y.product(&win_y);
            let (wx0, wy0) = (wx.moment0(), wy.moment0());
            den = den + w * wx0 * wy0;
            num_x = num_x + w * wx.moment1() * wy0;
            num_y = num_y + w * wx0 * wy.moment1();
        }
    }
    Moments { num: Vec2::new(num_x, num_y), den, overlap }
}

/// Integration box covering both states' branches and the probe window.
fn integration_box<T: Real>(chi: &FrozenState<T>, psi: &FrozenState<T>, wma: Option<&Wma<T>>) -> Rect<T> {
    let mut rect: Option<Rect<T>> = None;
    let mut extend = |c: Vec2<T>, half: T| {
        let b = Rect::centered(c, half);
        rect = Some(match rect.take() {
            None => b,
            Some(r) => r.union(&b),
        });
    };
    for state in [chi, psi] {
        let m = state.mass_hbar().0;
        for j in 0..state.branch_count() {
            let alpha = state
                .branch_state(j, Axis::X)
                .alpha
                .max(state.branch_state(j, Axis::Y).alpha);
            let sigma = alpha / (T::two() * m.sqrt());
            extend(state.branch_center(j), sigma * T::of(8.0));
        }
    }
    if let Some(wma) = wma {
        extend(wma.r0, wma.width * T::of(8.0));
    }
    rect.expect("states have branches")
}

fn quadrature_moments<T: Real>(
    chi: &FrozenState<T>,
    psi: &FrozenState<T>,
    wma: &Wma<T>,
    tol_scale: T,
) -> Moments<T> {
    let rect = integration_box(chi, psi, Some(wma));
    let w2 = wma.width * wma.width;
    let windowed = |r: Vec2<T>| {
        let f = (-(r - wma.r0).norm_sq() / w2).exp();
        chi.value(r).conj() * psi.value(r) * f
    };
    let tol = (tol_scale * T::of(1e-8)).max(T::of(1e-14));
    let den = integrate_2d(|r| windowed(r), rect, tol);
    let num_x = integrate_2d(|r| windowed(r) * r.x, rect, tol);
    let num_y = integrate_2d(|r| windowed(r) * r.y, rect, tol);
    let overlap = integrate_2d(|r| chi.value(r).conj() * psi.value(r), rect, tol);
    Moments { num: Vec2::new(num_x, num_y), den, overlap }
}

/// Whether/how often the sweep re-derives records by quadrature.
#[derive(Clone, Copy, Debug)]
pub enum CrossCheck {
    Always,
    /// Every n-th eligible record (deterministic).
    Stride(usize),
    Never,
}

fn classify<T: Real>(
    wma: &Wma<T>,
    m: &Moments<T>,
    thresholds: &WeakThresholds<T>,
    overlap_flagged: bool,
    method: Method,
) -> Result<WeakValueRecord<T>> {
    let num_mag = m.num.norm_max();
    let den_mag = m.den.norm();
    let zero = C::new(T::zero(), T::zero());

    let status = if num_mag < thresholds.numerator && den_mag < thresholds.numerator {
        RecordStatus::Vanishing
    } else if m.overlap.norm() < thresholds.compatibility {
        return Err(CoreError::IncompatiblePostselection {
            t: wma.t_k.to_f64().unwrap_or(f64::NAN),
            overlap: m.overlap.norm().to_f64().unwrap_or(f64::NAN),
            threshold: thresholds.compatibility.to_f64().unwrap_or(f64::NAN),
        });
    } else if den_mag < thresholds.numerator {
        RecordStatus::IllConditioned
    } else {
        RecordStatus::Ok
    };

    let value = match status {
        RecordStatus::Vanishing => Vec2::new(zero, zero),
        _ => Vec2::new(m.num.x / m.den, m.num.y / m.den),
    };
    Ok(WeakValueRecord {
        wma_id: wma.id,
        t_k: wma.t_k,
        r0: wma.r0,
        value,
        normalization: m.overlap,
        windowed_overlap: m.den,
        branch: None,
        method,
        status,
        overlap_flagged,
    })
}

/// Position weak value of one probe with the postselected state already
/// evolved backward. Closed-form moments are cross-checked against adaptive
/// quadrature when requested; the analytic value is returned.
pub fn weak_position_value_with<T: Real>(
    pre: &Superposition<T>,
    chi: &Superposition<T>,
    wma: &Wma<T>,
    thresholds: &WeakThresholds<T>,
    cross_check: CrossCheck,
) -> Result<WeakValueRecord<T>> {
    let fc = chi.frozen_at(wma.t_k)?;
    let fp = pre.frozen_at(wma.t_k)?;
    weak_position_value_frozen(&fc, &fp, wma, thresholds, cross_check)
}

fn weak_position_value_frozen<T: Real>(
    fc: &FrozenState<T>,
    fp: &FrozenState<T>,
    wma: &Wma<T>,
    thresholds: &WeakThresholds<T>,
    cross_check: CrossCheck,
) -> Result<WeakValueRecord<T>> {
    let moments = analytic_moments(fc, fp, wma);
    let overlap_flagged = fp.branches_present(wma.r0, thresholds.overlap_amplitude_frac) >= 2;
    let record = classify(wma, &moments, thresholds, overlap_flagged, Method::Analytic)?;

    let do_check = matches!(cross_check, CrossCheck::Always) && record.status == RecordStatus::Ok;
    if do_check {
        let q = quadrature_moments(fc, fp, wma, moments.den.norm());
        let qv = Vec2::new(q.num.x / q.den, q.num.y / q.den);
        let scale = record.value.norm_max().max(T::of(1e-12));
        let diff = Vec2::new(record.value.x - qv.x, record.value.y - qv.y).norm_max();
        if diff / scale > thresholds.route_agreement {
            return Err(CoreError::InvalidParameter(format!(
                "analytic/quadrature weak-value mismatch: rel {:.3e} at wma {}",
                (diff / scale).to_f64().unwrap_or(f64::NAN),
                wma.id
            )));
        }
    }
    Ok(record)
}

/// Position weak value for a preselected state, a postselection description
/// and one probe. The postselected state is evolved backward across the
/// preselected state's span.
pub fn weak_position_value<T: Real>(
    pre: &Superposition<T>,
    post: &PostselectionState<T>,
    wma: &Wma<T>,
    thresholds: &WeakThresholds<T>,
    opts: &OdeOptions<T>,
) -> Result<WeakValueRecord<T>> {
    let (lo, _hi) = pre.span();
    let chi = post.backward_state(pre, lo, opts)?;
    weak_position_value_with(pre, &chi, wma, thresholds, CrossCheck::Always)
}

/// The quadrature-only route, used by the affine-structure extraction and as
/// the independent side of dual-route checks.
pub fn weak_position_value_quadrature<T: Real>(
    pre: &Superposition<T>,
    chi: &Superposition<T>,
    wma: &Wma<T>,
    thresholds: &WeakThresholds<T>,
) -> Result<WeakValueRecord<T>> {
    let fc = chi.frozen_at(wma.t_k)?;
    let fp = pre.frozen_at(wma.t_k)?;
    let est = analytic_moments(&fc, &fp, wma);
    let q = quadrature_moments(&fc, &fp, wma, est.den.norm());
    let overlap_flagged = fp.branches_present(wma.r0, thresholds.overlap_amplitude_frac) >= 2;
    classify(wma, &q, thresholds, overlap_flagged, Method::Quadrature)
}

/// Run a full probe sweep: one record per WMA, deterministic order, failures
/// recorded per probe rather than aborting.
pub fn run_wma_grid<T: Real>(
    pre: &Superposition<T>,
    chi: &Superposition<T>,
    wmas: &[Wma<T>],
    thresholds: &WeakThresholds<T>,
    cross_check: CrossCheck,
) -> Result<Vec<WeakValueRecord<T>>> {
    // Freeze both states once per distinct interaction time.
    let mut times: Vec<T> = wmas.iter().map(|w| w.t_k).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let frozen: Vec<(T, FrozenState<T>, FrozenState<T>)> = times
        .iter()
        .map(|&t| Ok((t, chi.frozen_at(t)?, pre.frozen_at(t)?)))
        .collect::<Result<_>>()?;
    let lookup = |t: T| {
        let idx = frozen
            .binary_search_by(|probe| probe.0.partial_cmp(&t).unwrap())
            .expect("time was inserted above");
        &frozen[idx]
    };

    let stride = match cross_check {
        CrossCheck::Always => 1,
        CrossCheck::Stride(n) => n.max(1),
        CrossCheck::Never => usize::MAX,
    };

    let records: Vec<WeakValueRecord<T>> = wmas
        .par_iter()
        .enumerate()
        .map(|(i, wma)| {
            let (_, fc, fp) = lookup(wma.t_k);
            let check = if stride != usize::MAX && i % stride == 0 {
                CrossCheck::Always
            } else {
                CrossCheck::Never
            };
            match weak_position_value_frozen(fc, fp, wma, thresholds, check) {
                Ok(rec) => Ok(rec),
                Err(CoreError::IncompatiblePostselection { .. }) => {
                    let m = analytic_moments(fc, fp, wma);
                    let mut rec = WeakValueRecord {
                        wma_id: wma.id,
                        t_k: wma.t_k,
                        r0: wma.r0,
                        value: Vec2::new(m.num.x / m.den, m.num.y / m.den),
                        normalization: m.overlap,
                        windowed_overlap: m.den,
                        branch: None,
                        method: Method::Analytic,
                        status: RecordStatus::IllConditioned,
                        overlap_flagged: fp.branches_present(wma.r0, thresholds.overlap_amplitude_frac) >= 2,
                    };
                    if !rec.value.x.is_finite() || !rec.value.y.is_finite() {
                        rec.value = Vec2::new(C::new(T::zero(), T::zero()), C::new(T::zero(), T::zero()));
                    }
                    Ok(rec)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(records)
}

trait ComplexFinite {
    fn is_finite(&self) -> bool;
}

impl<T: Real> ComplexFinite for C<T> {
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Rectangular probe lattice replicated over a set of interaction times,
/// ids assigned row-major, time-major.
pub fn wma_lattice<T: Real>(
    x: (T, T, usize),
    y: (T, T, usize),
    times: &[T],
    width: T,
) -> Vec<Wma<T>> {
    let mut out = Vec::with_capacity(x.2 * y.2 * times.len());
    let mut id = 0usize;
    for &t_k in times {
        for iy in 0..y.2 {
            let fy = if y.2 > 1 { T::of(iy as f64) / T::of((y.2 - 1) as f64) } else { T::half() };
            let ry = y.0 + (y.1 - y.0) * fy;
            for ix in 0..x.2 {
                let fx = if x.2 > 1 { T::of(ix as f64) / T::of((x.2 - 1) as f64) } else { T::half() };
                let rx = x.0 + (x.1 - x.0) * fx;
                out.push(Wma { id, r0: Vec2::new(rx, ry), width, t_k });
                id += 1;
            }
        }
    }
    out
}

/// One recovered weak trajectory: per interaction time, the response-weighted
/// real part of the registered weak values assigned to a branch.
#[derive(Clone, Debug)]
pub struct WeakTrajectory<T> {
    pub branch: usize,
    pub points: Vec<WeakPoint<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct WeakPoint<T> {
    pub t_k: T,
    /// Response-weighted mean of Re <r>_W over the contributing records.
    pub position: Vec2<T>,
    pub n_records: usize,
    /// Total |windowed response| behind the point.
    pub weight: T,
}

/// Assembly result; unassigned records are reported, never dropped silently.
#[derive(Clone, Debug)]
pub struct AssemblyOutcome<T> {
    pub trajectories: Vec<WeakTrajectory<T>>,
    /// Indices into the input record slice.
    pub unassigned: Vec<usize>,
    /// Branch assigned to each input record (None: ineligible or unassigned).
    pub assignments: Vec<Option<usize>>,
}

/// Group non-vanishing records by the nearest preselected guiding trajectory
/// (distance at the interaction time, in units of the window width) and
/// aggregate per time. Records farther than `max_distance_w` window widths
/// from every branch are reported as unassigned.
pub fn assemble_weak_trajectories<T: Real>(
    records: &[WeakValueRecord<T>],
    pre: &Superposition<T>,
    window_width: T,
    max_distance_w: T,
) -> Result<AssemblyOutcome<T>> {
    let nb = pre.branches().len();
    // (branch, t_k) -> accumulated weighted position.
    struct Acc<T> {
        t_k: T,
        sum_w: T,
        sum_x: T,
        sum_y: T,
        n: usize,
    }
    let mut buckets: Vec<Vec<Acc<T>>> = (0..nb).map(|_| Vec::new()).collect();
    let mut unassigned = Vec::new();
    let mut assignments = vec![None; records.len()];

    for (idx, rec) in records.iter().enumerate() {
        if !rec.assembly_eligible() {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for (j, b) in pre.branches().iter().enumerate() {
            let q = b.traj.position(rec.t_k)?;
            let d = (rec.r0 - q).norm() / window_width;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("at least one branch");
        if d > max_distance_w {
            unassigned.push(idx);
            continue;
        }
        assignments[idx] = Some(j);
        let w = rec.windowed_overlap.norm();
        let bucket = &mut buckets[j];
        match bucket.iter_mut().find(|a| a.t_k == rec.t_k) {
            Some(acc) => {
                acc.sum_w = acc.sum_w + w;
                acc.sum_x = acc.sum_x + w * rec.value.x.re;
                acc.sum_y = acc.sum_y + w * rec.value.y.re;
                acc.n += 1;
            }
            None => bucket.push(Acc {
                t_k: rec.t_k,
                sum_w: w,
                sum_x: w * rec.value.x.re,
                sum_y: w * rec.value.y.re,
                n: 1,
            }),
        }
    }

    let mut trajectories = Vec::new();
    for (branch, bucket) in buckets.into_iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let mut points: Vec<WeakPoint<T>> = bucket
            .into_iter()
            .map(|a| WeakPoint {
                t_k: a.t_k,
                position: Vec2::new(a.sum_x / a.sum_w, a.sum_y / a.sum_w),
                n_records: a.n,
                weight: a.sum_w,
            })
            .collect();
        points.sort_by(|a, b| a.t_k.partial_cmp(&b.t_k).unwrap());
        trajectories.push(WeakTrajectory { branch, points });
    }
    Ok(AssemblyOutcome { trajectories, unassigned, assignments })
}

/// Momentum weak value with position postselection at (r_f, t):
/// -i hbar grad psi / psi. Real part: m v. Imaginary part: -hbar grad rho / 2 rho.
pub fn weak_momentum_value<T: Real>(
    state: &Superposition<T>,
    r_f: Vec2<T>,
    t: T,
) -> Result<Vec2<C<T>>> {
    let frozen = state.frozen_at(t)?;
    let f = frozen.field(r_f);
    let rho = f.value.norm_sqr();
    if rho < frozen.density_floor() {
        return Err(CoreError::SingularRegion {
            x: r_f.x.to_f64().unwrap_or(f64::NAN),
            y: r_f.y.to_f64().unwrap_or(f64::NAN),
            t: t.to_f64().unwrap_or(f64::NAN),
            rho: rho.to_f64().unwrap_or(f64::NAN),
            floor: frozen.density_floor().to_f64().unwrap_or(f64::NAN),
        });
    }
    let factor = -im::<T>() * cr(state.params.hbar);
    Ok(Vec2::new(factor * (f.gradient.x / f.value), factor * (f.gradient.y / f.value)))
}

/// Momentum weak value from two position measurements a short interval
/// apart: m (r_f - <r(t - eps)>_W) / eps, the backward-propagated position
/// weak value taken with postselection at r_f. Converges to
/// [`weak_momentum_value`] as eps -> 0.
pub fn weak_momentum_two_point<T: Real>(
    state: &Superposition<T>,
    r_f: Vec2<T>,
    t: T,
    eps: T,
) -> Result<Vec2<C<T>>> {
    if !(eps > T::zero()) {
        return Err(CoreError::InvalidParameter("eps must be positive".into()));
    }
    let frozen_now = state.frozen_at(t)?;
    let rho = frozen_now.density(r_f);
    if rho < frozen_now.density_floor() {
        return Err(CoreError::SingularRegion {
            x: r_f.x.to_f64().unwrap_or(f64::NAN),
            y: r_f.y.to_f64().unwrap_or(f64::NAN),
            t: t.to_f64().unwrap_or(f64::NAN),
            rho: rho.to_f64().unwrap_or(f64::NAN),
            floor: frozen_now.density_floor().to_f64().unwrap_or(f64::NAN),
        });
    }

    let t_prev = t - eps;
    let fp = state.frozen_at(t_prev)?;
    // Any branch trajectory supplies the (alpha, phi) kernel profile.
    let ref_traj: &GuidingTrajectory<T> = &state.branches()[0].traj;

    let kx = crate::wavepacket::propagator::kernel_quadratic_in_x0(ref_traj, Axis::X, r_f.x, t, t_prev)?;
    let ky = crate::wavepacket::propagator::kernel_quadratic_in_x0(ref_traj, Axis::Y, r_f.y, t, t_prev)?;

    let zero = C::new(T::zero(), T::zero());
    let (mut num_x, mut num_y, mut den) = (zero, zero, zero);
    for j in 0..fp.branch_count() {
        let w = fp.weight(j);
        let px = kx.product(&fp.branch_quadratic(j, Axis::X));
        let py = ky.product(&fp.branch_quadratic(j, Axis::Y));
        let (px0, py0) = (px.moment0(), py.moment0());
        den = den + w * px0 * py0;
        num_x = num_x + w * px.moment1() * py0;
        num_y = num_y + w * px0 * py.moment1();
    }
    let r_prev = Vec2::new(num_x / den, num_y / den);
    let scale = cr(state.params.mass / eps);
    Ok(Vec2::new((cr(r_f.x) - r_prev.x) * scale, (cr(r_f.y) - r_prev.y) * scale))
}

/// Observable for the expectation-decomposition identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Position,
    Momentum,
}

/// Compare <psi|A|psi> computed directly by quadrature with the continuum
/// decomposition over position postselections,
/// integral of rho(r_f) Re<A>_W(r_f) dr_f. Returns the per-component
/// difference (both sides normalized by <psi|psi>).
pub fn expectation_identity_check<T: Real>(
    state: &Superposition<T>,
    observable: Observable,
    t: T,
) -> Result<Vec2<T>> {
    let frozen = state.frozen_at(t)?;
    let rect = integration_box(&frozen, &frozen, None);
    let tol = T::of(1e-10);
    let norm = frozen_overlap(&frozen, &frozen).re;
    let hbar = state.params.hbar;
    let floor = frozen.density_floor();

    let direct = |axis: Axis| -> T {
        match observable {
            Observable::Position => {
                integrate_2d(|r| cr(frozen.density(r) * r.get(axis)), rect, tol).re / norm
            }
            Observable::Momentum => {
                integrate_2d(
                    |r| {
                        let f = frozen.field(r);
                        f.value.conj() * (-im::<T>() * cr(hbar)) * f.gradient.get(axis)
                    },
                    rect,
                    tol,
                )
                .re / norm
            }
        }
    };

    // Weak route: rho(r_f) Re<A>_W(r_f); for momentum this is hbar Im(conj(psi) grad psi),
    // continuous through nodes, so sub-floor points contribute their limit 0.
    let weak_route = |axis: Axis| -> T {
        match observable {
            Observable::Position => {
                integrate_2d(|r| cr(frozen.density(r) * r.get(axis)), rect, tol).re / norm
            }
            Observable::Momentum => {
                integrate_2d(
                    |r| {
                        let f = frozen.field(r);
                        let rho = f.value.norm_sqr();
                        if rho < floor {
                            return C::new(T::zero(), T::zero());
                        }
                        let pw_re = (-im::<T>() * cr(hbar) * (f.gradient.get(axis) / f.value)).re;
                        cr(rho * pw_re)
                    },
                    rect,
                    tol / T::of(10.0),
                )
                .re / norm
            }
        }
    };

    Ok(Vec2::new(
        direct(Axis::X) - weak_route(Axis::X),
        direct(Axis::Y) - weak_route(Axis::Y),
    ))
}

/// Least-squares affine model of quadrature weak values against the
/// phase-space mismatch between the probed branch and the backward-evolved
/// postselection.
#[derive(Clone, Debug)]
pub struct AffineFit<T> {
    /// Fitted value at zero mismatch (should be the guiding position).
    pub base: Vec2<C<T>>,
    /// Complex coefficient of (q^J - q_f) per axis.
    pub m1: Vec2<C<T>>,
    /// Complex coefficient of (p^J - p_f) per axis.
    pub m2: Vec2<C<T>>,
    /// ||model - data|| / ||data - mean||, max over axes.
    pub rel_residual: T,
    pub n_samples: usize,
}

/// Probe a branch at `t_k` with the WMA sitting on the guiding trajectory,
/// vary the postselection around the branch-matched values by the supplied
/// phase-space displacements (applied at `t_f`), and fit the quadrature weak
/// values affinely in the mismatch at `t_k`.
#[allow(clippy::too_many_arguments)]
pub fn affine_structure_fit<T: Real>(
    pre: &Superposition<T>,
    branch: usize,
    t_k: T,
    t_f: T,
    delta_f: T,
    displacements: &[(Vec2<T>, Vec2<T>)],
    window_width: T,
    thresholds: &WeakThresholds<T>,
    opts: &OdeOptions<T>,
) -> Result<AffineFit<T>> {
    let traj = &pre.branches()[branch].traj;
    let q_branch_f = traj.position(t_f)?;
    let p_branch_f = traj.momentum(t_f)?;
    let q_branch_k = traj.position(t_k)?;
    let p_branch_k = traj.momentum(t_k)?;
    let wma = Wma { id: 0, r0: q_branch_k, width: window_width, t_k };
    let (lo, _) = pre.span();

    // Collect (dq(t_k), dp(t_k), value) samples; quadrature route only.
    let samples: Vec<(Vec2<T>, Vec2<T>, Vec2<C<T>>)> = displacements
        .par_iter()
        .map(|&(dr, dp)| -> Result<_> {
            let post = PostselectionState::GaussianPacket {
                r_f: q_branch_f + dr,
                p_f: p_branch_f + dp,
                delta_f,
                t_f,
            };
            let chi = post.backward_state(pre, lo, opts)?;
            let rec = weak_position_value_quadrature(pre, &chi, &wma, thresholds)?;
            let qf = chi.branches()[0].traj.position(t_k)?;
            let pf = chi.branches()[0].traj.momentum(t_k)?;
            Ok((q_branch_k - qf, p_branch_k - pf, rec.value))
        })
        .collect::<Result<_>>()?;

    // Complex least squares per axis on [1, dq_x, dq_y, dp_x, dp_y].
    let n = samples.len();
    if n < 6 {
        return Err(CoreError::InvalidParameter("affine fit needs at least 6 samples".into()));
    }
    let fit_axis = |axis: Axis| -> (C<T>, [C<T>; 4], T) {
        let rows: Vec<[C<T>; 5]> = samples
            .iter()
            .map(|(dq, dp, _)| {
                [
                    cr(T::one()),
                    cr(dq.x),
                    cr(dq.y),
                    cr(dp.x),
                    cr(dp.y),
                ]
            })
            .collect();
        let rhs: Vec<C<T>> = samples.iter().map(|(_, _, v)| v.get(axis)).collect();
        let coef = complex_lstsq(&rows, &rhs);
        // Residual.
        let mut ss_res = T::zero();
        let mut mean = C::new(T::zero(), T::zero());
        for v in &rhs {
            mean = mean + *v;
        }
        mean = mean / T::of(n as f64);
        let mut ss_tot = T::zero();
        for (row, v) in rows.iter().zip(rhs.iter()) {
            let mut model = C::new(T::zero(), T::zero());
            for (c, x) in coef.iter().zip(row.iter()) {
                model = model + *c * *x;
            }
            ss_res = ss_res + (*v - model).norm_sqr();
            ss_tot = ss_tot + (*v - mean).norm_sqr();
        }
        let rel = (ss_res / ss_tot.max(T::of(1e-300))).sqrt();
        (coef[0], [coef[1], coef[2], coef[3], coef[4]], rel)
    };

    let (base_x, cx, rx) = fit_axis(Axis::X);
    let (base_y, cy, ry) = fit_axis(Axis::Y);
    Ok(AffineFit {
        base: Vec2::new(base_x, base_y),
        m1: Vec2::new(cx[0], cy[1]),
        m2: Vec2::new(cx[2], cy[3]),
        rel_residual: rx.max(ry),
        n_samples: n,
    })
}

/// Normal-equation complex least squares for a handful of unknowns.
fn complex_lstsq<T: Real, const K: usize>(rows: &[[C<T>; K]], rhs: &[C<T>]) -> [C<T>; K] {
    let zero = C::new(T::zero(), T::zero());
    let mut ata = [[zero; K]; K];
    let mut atb = [zero; K];
    for (row, b) in rows.iter().zip(rhs.iter()) {
        for i in 0..K {
            let ai = row[i].conj();
            for j in 0..K {
                ata[i][j] = ata[i][j] + ai * row[j];
            }
            atb[i] = atb[i] + ai * *b;
        }
    }
    // Gaussian elimination with partial pivoting.
    let mut a = ata;
    let mut b = atb;
    for col in 0..K {
        let mut piv = col;
        for r in col + 1..K {
            if a[r][col].norm() > a[piv][col].norm() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in 0..K {
            if r == col {
                continue;
            }
            let f = a[r][col] / d;
            for c in col..K {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut out = [zero; K];
    for i in 0..K {
        out[i] = b[i] / a[i][i];
    }
    out
}
