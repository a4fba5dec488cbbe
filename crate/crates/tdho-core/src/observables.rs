//! Recurrence spectrum of a small region and the classical origin-crossing
//! times it mirrors.

use rayon::prelude::*;

use crate::ermakov::GuidingTrajectory;
use crate::error::{CoreError, Result};
use crate::quadrature::integrate_disc;
use crate::real::Real;
use crate::vec2::Vec2;
use crate::wavepacket::Superposition;

/// Default region radius as a fraction of the anchor width.
pub const REGION_RADIUS_FRAC: f64 = 0.25;
/// Default peak prominence as a fraction of the maximum of P(t).
pub const PEAK_PROMINENCE_FRAC: f64 = 0.05;

/// Disc region.
#[derive(Clone, Copy, Debug)]
pub struct Region<T> {
    pub center: Vec2<T>,
    pub radius: T,
}

/// Probability mass P(t) in a region over a time grid, with detected peaks.
#[derive(Clone, Debug)]
pub struct RecurrenceSpectrum<T> {
    pub region: Region<T>,
    pub times: Vec<T>,
    pub mass: Vec<T>,
    /// (peak time, height), strict local maxima above the prominence
    /// threshold, times refined by parabolic interpolation.
    pub peaks: Vec<(T, T)>,
}

/// P(t) = integral over the region of |psi|^2, by the polar quadrature rule;
/// the state's norm makes 0 <= P <= 1 for normalized weights.
pub fn recurrence_spectrum<T: Real>(
    state: &Superposition<T>,
    region: Region<T>,
    times: &[T],
    prominence_frac: T,
) -> Result<RecurrenceSpectrum<T>> {
    if !(region.radius > T::zero()) {
        return Err(CoreError::InvalidParameter("region radius must be positive".into()));
    }
    let mass: Vec<T> = times
        .par_iter()
        .map(|&t| -> Result<T> {
            let frozen = state.frozen_at(t)?;
            Ok(integrate_disc(|r| frozen.density(r), region.center, region.radius, 24, 24))
        })
        .collect::<Result<_>>()?;

    let peaks = detect_peaks(times, &mass, prominence_frac);
    Ok(RecurrenceSpectrum { region, times: times.to_vec(), mass, peaks })
}

fn detect_peaks<T: Real>(times: &[T], mass: &[T], prominence_frac: T) -> Vec<(T, T)> {
    let mut max_p = T::zero();
    for &p in mass {
        max_p = max_p.max(p);
    }
    let threshold = max_p * prominence_frac;
    let mut peaks = Vec::new();
    for i in 1..mass.len().saturating_sub(1) {
        if mass[i] > mass[i - 1] && mass[i] >= mass[i + 1] && mass[i] >= threshold {
            // Parabolic refinement through the three samples.
            let (pm, p0, pp) = (mass[i - 1], mass[i], mass[i + 1]);
            let denom = pm - T::two() * p0 + pp;
            let delta = if denom.abs() > T::of(1e-300) {
                (T::half() * (pm - pp) / denom).max(-T::half()).min(T::half())
            } else {
                T::zero()
            };
            let dt = if i + 1 < times.len() { times[i + 1] - times[i] } else { times[i] - times[i - 1] };
            peaks.push((times[i] + delta * dt, p0));
        }
    }
    peaks
}

/// Times at which a guiding trajectory dips into the region: interior local
/// minima of |q(t) - center| below the radius, refined by golden-section
/// search. Minima at the span boundary are not counted; pad the span when a
/// crossing may sit exactly on an endpoint. Returns branch-labelled times
/// sorted by time.
pub fn classical_crossings<T: Real>(
    trajs: &[(usize, &GuidingTrajectory<T>)],
    center: Vec2<T>,
    radius: T,
    t_lo: T,
    t_hi: T,
) -> Result<Vec<(T, usize)>> {
    let mut out: Vec<(T, usize)> = Vec::new();
    let n_scan = 2048usize;
    for &(label, traj) in trajs {
        let dist = |t: T| -> Result<T> { Ok((traj.position(t)? - center).norm()) };
        let dt = (t_hi - t_lo) / T::of(n_scan as f64);
        let mut prev2 = dist(t_lo)?;
        let mut prev1 = dist(t_lo + dt)?;
        for i in 2..=n_scan {
            let t = t_lo + dt * T::of(i as f64);
            let cur = dist(t)?;
            if prev1 <= prev2 && prev1 <= cur {
                // Bracketed local minimum around t - dt.
                let (a, b) = (t - dt - dt, t);
                let t_min = golden_min(&|x| dist(x).unwrap_or(T::infinity()), a, b);
                let d_min = dist(t_min)?;
                if d_min < radius {
                    out.push((t_min, label));
                }
            }
            prev2 = prev1;
            prev1 = cur;
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Merge duplicate detections of the same branch minimum.
    out.dedup_by(|a, b| a.1 == b.1 && (a.0 - b.0).abs() < T::of(1e-6));
    Ok(out)
}

fn golden_min<T: Real, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> T {
    let phi = T::of(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * phi;
    let mut d = a + (b - a) * phi;
    for _ in 0..80 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - (b - a) * phi;
        d = a + (b - a) * phi;
        if (b - a).abs() < T::of(1e-12) {
            break;
        }
    }
    (a + b) * T::half()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::{integrate_ermakov, ErmakovInit};
    use crate::ode::OdeOptions;
    use crate::params::OscillatorParams;

    fn static_branch(p0: Vec2<f64>, t_hi: f64) -> (OscillatorParams<f64>, GuidingTrajectory<f64>) {
        let params = OscillatorParams::isotropic_static(1.0).unwrap();
        let init = ErmakovInit::uniform(Vec2::zero(), p0, 2.0f64.sqrt());
        let traj = integrate_ermakov(&params, &init, 0.0, t_hi, &OdeOptions::default()).unwrap();
        (params, traj)
    }

    #[test]
    fn sine_crossings_at_multiples_of_pi() {
        let t_hi = 2.0 * std::f64::consts::PI + 0.3;
        let (_, traj) = static_branch(Vec2::new(1.0, 0.0), t_hi);
        let crossings =
            classical_crossings(&[(0, &traj)], Vec2::zero(), 0.2, 0.05, t_hi).unwrap();
        assert_eq!(crossings.len(), 2, "crossings: {crossings:?}");
        assert!((crossings[0].0 - std::f64::consts::PI).abs() < 1e-6);
        assert!((crossings[1].0 - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn empty_trajectory_list_gives_empty() {
        let crossings =
            classical_crossings::<f64>(&[], Vec2::zero(), 0.2, 0.0, 1.0).unwrap();
        assert!(crossings.is_empty());
    }

    #[test]
    fn single_branch_peaks_at_origin_passages() {
        let t_hi = 2.0 * std::f64::consts::PI + 0.3;
        let (params, traj) = static_branch(Vec2::new(1.0, 0.0), t_hi);
        let state = Superposition::new(params, vec![(1.0, traj)]).unwrap();
        let times: Vec<f64> = (0..600).map(|i| 0.05 + (t_hi - 0.1) * i as f64 / 599.0).collect();
        let region = Region { center: Vec2::zero(), radius: 0.2 };
        let spec = recurrence_spectrum(&state, region, &times, 0.05).unwrap();
        // Peaks at t = pi and 2 pi within grid resolution.
        assert_eq!(spec.peaks.len(), 2, "peaks: {:?}", spec.peaks);
        let dt = times[1] - times[0];
        assert!((spec.peaks[0].0 - std::f64::consts::PI).abs() < 2.0 * dt);
        assert!((spec.peaks[1].0 - 2.0 * std::f64::consts::PI).abs() < 2.0 * dt);
        // Mass is a probability.
        for &p in &spec.mass {
            assert!(p >= 0.0 && p <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn far_from_region_mass_is_negligible() {
        let (params, traj) = static_branch(Vec2::new(6.0, 0.0), 3.2);
        let state = Superposition::new(params, vec![(1.0, traj)]).unwrap();
        // At t = pi/2 the packet sits at (6, 0), 6 units from the origin.
        let frozen = state.frozen_at(std::f64::consts::FRAC_PI_2).unwrap();
        let p = integrate_disc(|r| frozen.density(r), Vec2::zero(), 0.2, 24, 24);
        assert!(p <= 1e-6, "P = {p:e}");
    }
}
