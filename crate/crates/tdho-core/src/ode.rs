//! Adaptive embedded Runge-Kutta integration with continuous (dense) output.
//!
//! The stepper is Verner's efficient 6(5) pair: 9 stages, embedded 5th-order
//! error estimate and a 5th-order interpolant that needs one extra stage per
//! accepted step. Coefficients from Verner's published RKV65.IIIXb tables.
//! Dense output is what the rest of the crate leans on: guiding trajectories
//! are integrated once and queried at arbitrary times afterwards.

use crate::error::{CoreError, Result};
use crate::real::Real;

const STAGES: usize = 9;
const EXTRA: usize = 1;
const TOTAL: usize = STAGES + EXTRA;
const DENSE_COEFFS: usize = 6;
const ORDER: usize = 6;

#[rustfmt::skip]
const A: [[f64; STAGES]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6e-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.923_996_296_296_296_2e-2, 7.669_337_037_037_037e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.35975e-1, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.318_683_415_233_148_4, 0.0, -5.042_058_063_628_562, 4.220_674_648_395_414, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-41.872_591_664_327_516, 0.0, 159.432_562_163_137_5, -122.119_213_565_010_03, 5.531_743_066_200_054, 0.0, 0.0, 0.0, 0.0],
    [-54.430_156_935_316_504, 0.0, 207.067_251_365_018_48, -158.610_813_784_59, 6.991_816_585_950_242, -1.859_723_106_220_323_4e-2, 0.0, 0.0, 0.0],
    [-54.663_741_787_281_98, 0.0, 207.952_806_255_389_36, -159.288_957_474_499_5, 7.018_743_740_796_944, -1.833_878_590_504_572_2e-2, -5.119_484_997_882_099e-4, 0.0, 0.0],
    [3.438_957_868_357_036e-2, 0.0, 0.0, 0.258_262_455_563_350_3, 0.420_937_118_967_353_7, 4.405_396_469_669_31, -176.483_119_024_298_65, 172.364_133_401_415_07, 0.0],
];

#[rustfmt::skip]
const B_HIGH: [f64; STAGES] = [
    3.438_957_868_357_036e-2, 0.0, 0.0, 0.258_262_455_563_350_3, 0.420_937_118_967_353_7,
    4.405_396_469_669_31, -176.483_119_024_298_65, 172.364_133_401_415_07, 0.0,
];

#[rustfmt::skip]
const B_LOW: [f64; STAGES] = [
    4.909_967_648_382_49e-2, 0.0, 0.0, 0.225_111_222_951_652_42, 0.469_468_225_302_956_2,
    0.806_579_224_998_886_8, 0.0, -0.607_119_489_177_796, 5.686_113_944_047_569_6e-2,
];

#[rustfmt::skip]
const C: [f64; STAGES] = [
    0.0, 0.6e-1, 9.593_333_333_333_333e-2, 0.1439, 0.4973, 0.9725, 0.9995, 1.0, 1.0,
];

#[rustfmt::skip]
const A_DENSE: [[f64; TOTAL]; EXTRA] = [
    [1.652_415_901_357_280_6e-2, 0.0, 0.0, 0.305_312_818_751_417_9, 0.207_120_093_820_197_9,
     -1.293_879_140_655_123, 57.119_884_115_881_49, -55.879_792_075_109_32, 2.483_002_829_776_601_4e-2, 0.0],
];

const C_DENSE: [f64; EXTRA] = [0.5];

#[rustfmt::skip]
const B_DENSE: [[f64; DENSE_COEFFS]; TOTAL] = [
    [1.0, -5.308_169_607_103_577, 10.181_680_448_958_68, -7.520_036_991_611_715, 0.934_048_536_863_116_1, 0.746_867_191_577_065],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 6.272_050_253_212_501, -16.026_181_474_677_46, 12.844_356_324_519_618, -1.148_794_504_476_759_1, -1.683_168_143_014_549_8],
    [0.0, 6.876_491_702_846_304, -24.635_767_260_846_333, 33.210_786_483_797_17, -17.494_615_282_636_44, 2.464_041_475_806_649_6],
    [0.0, -35.544_451_710_599_6, 165.701_617_019_024_2, -385.463_539_549_114_3, 442.432_413_701_570_17, -182.720_642_991_211_2],
    [0.0, 1_918.654_856_698_011_4, -9_268.121_508_966_042, 20_858.337_028_772_55, -22_645.827_671_584_81, 8_960.474_176_055_992],
    [0.0, -1_883.069_802_132_718_2, 9_101.025_187_200_634, -20_473.188_551_959_534, 22_209.765_551_256_532, -8_782.168_250_963_5],
    [0.0, 0.119_024_796_351_236_43, -0.125_026_967_050_393_76, 1.779_956_919_394_999_1, -4.660_932_123_043_763, 2.886_977_374_347_921],
    [0.0, -8.0, 32.0, -40.0, 16.0, 0.0],
];

/// Step-size and error control knobs.
#[derive(Clone, Debug)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; defaults to span / 1000.
    pub h0: Option<T>,
    /// Hard cap on |h|.
    pub max_step: Option<T>,
    /// Cap on the Euclidean displacement of the state per accepted step.
    pub max_displacement: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-10),
            atol: T::of(1e-12),
            h0: None,
            max_step: None,
            max_displacement: None,
            max_steps: 1_000_000,
        }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tolerances(rtol: T, atol: T) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

/// One accepted step with everything needed to interpolate inside it.
#[derive(Clone, Debug)]
pub struct Segment<T, const N: usize> {
    pub t0: T,
    pub h: T,
    pub y0: [T; N],
    k: [[T; N]; TOTAL],
}

impl<T: Real, const N: usize> Segment<T, N> {
    /// 5th-order interpolation at `t` inside the segment.
    fn eval(&self, t: T) -> [T; N] {
        let s = (t - self.t0) / self.h;
        let mut y = self.y0;
        for (i, ks) in self.k.iter().enumerate() {
            // b_i(s) = s * (c0 + c1 s + ... + c5 s^5), Horner form.
            let row = &B_DENSE[i];
            let mut poly = T::of(row[DENSE_COEFFS - 1]);
            for j in (0..DENSE_COEFFS - 1).rev() {
                poly = poly * s + T::of(row[j]);
            }
            let w = self.h * s * poly;
            for (yi, ki) in y.iter_mut().zip(ks.iter()) {
                *yi = *yi + w * *ki;
            }
        }
        y
    }
}

/// Continuous solution of an IVP over one time span.
#[derive(Clone, Debug)]
pub struct DenseOutput<T, const N: usize> {
    segments: Vec<Segment<T, N>>,
    t_start: T,
    t_end: T,
    y_start: [T; N],
    y_end: [T; N],
}

impl<T: Real, const N: usize> DenseOutput<T, N> {
    /// Inclusive time span as (low, high) regardless of integration direction.
    pub fn span(&self) -> (T, T) {
        if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        }
    }

    pub fn start_state(&self) -> (T, [T; N]) {
        (self.t_start, self.y_start)
    }

    pub fn end_state(&self) -> (T, [T; N]) {
        (self.t_end, self.y_end)
    }

    /// Accepted-step node states, in integration order, including both ends.
    pub fn nodes(&self) -> Vec<(T, [T; N])> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        for seg in &self.segments {
            out.push((seg.t0, seg.y0));
        }
        out.push((self.t_end, self.y_end));
        out
    }

    /// Interpolated state at `t`. Errors when `t` lies outside the span by
    /// more than a few ulps of slack.
    pub fn eval(&self, t: T) -> Result<[T; N]> {
        let (lo, hi) = self.span();
        let slack = (hi - lo).abs() * T::of(1e-12) + T::of(1e-300);
        if t < lo - slack || t > hi + slack {
            return Err(CoreError::OutOfRange {
                t: t.to_f64().unwrap_or(f64::NAN),
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
        // Node times return stored states exactly; the interpolant only
        // covers strict interiors.
        if t == self.t_end {
            return Ok(self.y_end);
        }
        let t = t.min(hi).max(lo);
        let forward = self.t_end >= self.t_start;
        // Binary search for the segment whose [t0, t0+h] contains t.
        let mut lo_i = 0usize;
        let mut hi_i = self.segments.len();
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            let starts_after = if forward {
                self.segments[mid].t0 <= t
            } else {
                self.segments[mid].t0 >= t
            };
            if starts_after {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        Ok(self.segments[lo_i].eval(t))
    }
}

/// Why the monitor asked the integration to halt early.
#[derive(Clone, Debug, PartialEq)]
pub struct Halt<R> {
    pub t: f64,
    pub reason: R,
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` (either direction) with
/// dense output. `monitor` inspects each accepted candidate state before it
/// is committed; returning `Some(reason)` stops the integration at the last
/// committed state without extrapolating into the flagged region.
pub fn integrate_monitored<T, const N: usize, F, M, R>(
    f: F,
    t0: T,
    y0: [T; N],
    t1: T,
    opts: &OdeOptions<T>,
    mut monitor: M,
) -> Result<(DenseOutput<T, N>, Option<Halt<R>>)>
where
    T: Real,
    F: Fn(T, &[T; N]) -> [T; N],
    M: FnMut(T, &[T; N]) -> Option<R>,
{
    if t1 == t0 {
        return Err(CoreError::InvalidParameter("integration span is empty (t1 == t0)".into()));
    }
    let span = t1 - t0;
    let dir = if span > T::zero() { T::one() } else { -T::one() };

    let mut h = opts.h0.unwrap_or(span / T::of(1000.0));
    if h * dir <= T::zero() {
        h = -h;
    }
    if let Some(hmax) = opts.max_step {
        if h.abs() > hmax {
            h = hmax * dir;
        }
    }

    let mut t = t0;
    let mut y = y0;
    let mut segments: Vec<Segment<T, N>> = Vec::new();
    let mut halt: Option<Halt<R>> = None;

    let mut steps = 0usize;
    let mut rejects_in_row = 0usize;
    let safety = T::of(0.9);
    let min_scale = T::of(0.1);
    let max_scale = T::of(5.0);

    'outer: while (t1 - t) * dir > T::zero() {
        if steps >= opts.max_steps {
            return Err(CoreError::StepFailure {
                t: t.to_f64().unwrap_or(f64::NAN),
                detail: format!("exceeded {} steps", opts.max_steps),
            });
        }
        steps += 1;

        // Do not overshoot the endpoint.
        if (t + h - t1) * dir > T::zero() {
            h = t1 - t;
        }
        if h.abs() < (t.abs() + T::one()) * T::epsilon() * T::of(4.0) {
            return Err(CoreError::StepFailure {
                t: t.to_f64().unwrap_or(f64::NAN),
                detail: "step size underflow".into(),
            });
        }

        // Stage evaluations.
        let mut k = [[T::zero(); N]; TOTAL];
        k[0] = f(t, &y);
        for i in 1..STAGES {
            let mut ys = y;
            for j in 0..i {
                let a = T::of(A[i][j]);
                if a != T::zero() {
                    let w = a * h;
                    for n in 0..N {
                        ys[n] = ys[n] + w * k[j][n];
                    }
                }
            }
            k[i] = f(t + T::of(C[i]) * h, &ys);
        }

        let mut y_high = y;
        let mut y_low = y;
        for i in 0..STAGES {
            let bh = T::of(B_HIGH[i]);
            let bl = T::of(B_LOW[i]);
            for n in 0..N {
                y_high[n] = y_high[n] + h * bh * k[i][n];
                y_low[n] = y_low[n] + h * bl * k[i][n];
            }
        }

        // Weighted max-norm error estimate.
        let mut err_norm = T::zero();
        for n in 0..N {
            let tol = opts.atol + opts.rtol * y[n].abs().max(y_high[n].abs());
            err_norm = err_norm.max(((y_high[n] - y_low[n]) / tol).abs());
        }

        // Optional displacement cap, treated as a rejection.
        if let Some(cap) = opts.max_displacement {
            let mut disp_sq = T::zero();
            for n in 0..N {
                let d = y_high[n] - y[n];
                disp_sq = disp_sq + d * d;
            }
            let disp = disp_sq.sqrt();
            if disp > cap {
                h = h * (cap / disp * T::half()).max(min_scale);
                rejects_in_row += 1;
                if rejects_in_row > 60 {
                    return Err(CoreError::StepFailure {
                        t: t.to_f64().unwrap_or(f64::NAN),
                        detail: "persistent displacement-cap rejections".into(),
                    });
                }
                continue 'outer;
            }
        }

        if err_norm <= T::one() {
            rejects_in_row = 0;
            let t_next = t + h;

            if let Some(reason) = monitor(t_next, &y_high) {
                halt = Some(Halt { t: t.to_f64().unwrap_or(f64::NAN), reason });
                break 'outer;
            }

            // Extra stage for the interpolant, evaluated at mid-step.
            for e in 0..EXTRA {
                let mut ys = y;
                for j in 0..TOTAL {
                    let a = T::of(A_DENSE[e][j]);
                    if a != T::zero() {
                        let w = a * h;
                        for n in 0..N {
                            ys[n] = ys[n] + w * k[j][n];
                        }
                    }
                }
                k[STAGES + e] = f(t + T::of(C_DENSE[e]) * h, &ys);
            }

            segments.push(Segment { t0: t, h, y0: y, k });
            t = t_next;
            y = y_high;
        } else {
            rejects_in_row += 1;
            if rejects_in_row > 60 {
                return Err(CoreError::StepFailure {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    detail: format!("local error target unreachable (err_norm = {:e})", err_norm.to_f64().unwrap_or(f64::NAN)),
                });
            }
        }

        let scale = (safety * err_norm.max(T::of(1e-30)).powf(-T::one() / T::of(ORDER as f64)))
            .max(min_scale)
            .min(max_scale);
        h = h * scale;
        if let Some(hmax) = opts.max_step {
            if h.abs() > hmax {
                h = hmax * dir;
            }
        }
    }

    if segments.is_empty() {
        // A monitor halt on the very first step leaves nothing integrated;
        // represent the point solution as a zero-length span.
        return Ok((
            DenseOutput { segments: vec![], t_start: t0, t_end: t0, y_start: y0, y_end: y0 },
            halt,
        ));
    }

    Ok((DenseOutput { segments, t_start: t0, t_end: t, y_start: y0, y_end: y }, halt))
}

/// `integrate_monitored` without a monitor.
pub fn integrate<T, const N: usize, F>(
    f: F,
    t0: T,
    y0: [T; N],
    t1: T,
    opts: &OdeOptions<T>,
) -> Result<DenseOutput<T, N>>
where
    T: Real,
    F: Fn(T, &[T; N]) -> [T; N],
{
    let (sol, _halt) = integrate_monitored(f, t0, y0, t1, opts, |_, _| None::<()>)?;
    Ok(sol)
}
