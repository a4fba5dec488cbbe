//! Shipped default scenarios. The numeric parameters are chosen to produce
//! origin-closed guiding trajectories and multiple recurrences inside
//! [0, 2 pi]; reference outputs come from this implementation's own checked
//! numerics.

use crate::config::*;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const PI: f64 = std::f64::consts::PI;

/// Single static coherent branch: q(t) = (sin t, 0), rigid transport.
pub fn static_reference() -> ScenarioConfig {
    ScenarioConfig {
        oscillator: OscillatorConfig {
            mass: 1.0,
            hbar: 1.0,
            vx: 1.0,
            vy: 1.0,
            kappa_x: 0.0,
            kappa_y: 0.0,
            omega_x: 0.0,
            omega_y: 0.0,
        },
        branches: vec![BranchConfig { p0: [1.0, 0.0], weight: 1.0 }],
        q0: [0.0, 0.0],
        alpha0: Some(SQRT2),
        normalize_weights: false,
        time: TimeConfig { t0: 0.0, t1: 2.0 * PI + 0.3, samples: 400 },
        seed: 7,
        tolerances: ToleranceConfig::default(),
        weak: None,
        bohm: Some(BohmConfig {
            points: vec![[0.3, -0.2], [0.0, 0.5]],
            t0: 0.0,
            t1: 2.0 * PI,
            max_displacement_frac: None,
            max_step: Some(0.02),
        }),
        ensemble: Some(EnsembleConfig { n: 2000, t0: 0.0, t1: 1.0, grid: [40, 40] }),
        recurrence: Some(RecurrenceConfig {
            center: [0.0, 0.0],
            radius: None,
            t_samples: 800,
            prominence: None,
        }),
        momentum_grid: Some(MomentumGridConfig {
            grid_x: GridConfig { min: -2.5, max: 2.5, count: 21 },
            grid_y: GridConfig { min: -2.5, max: 2.5, count: 21 },
            times: TimesConfig { start: 0.4, stop: 2.0, count: 3 },
            epsilon: Some(1e-3),
        }),
        propagator_check: Some(PropagatorCheckConfig {
            times: vec![0.7],
            x_min: -5.0,
            x_max: 5.0,
            x_count: 41,
        }),
        identity_check: Some(IdentityCheckConfig { times: vec![0.8, 1.6] }),
    }
}

/// Two branches on rationally locked axis frequencies (omega_x = 3.5,
/// omega_y = 0.5): branch 0 traces (sin 3.5t, 7 sin t/2) closing at the
/// origin only at t = 2 pi, branch 1 runs along (2 sin 3.5t, 0) and
/// revisits it every 2 pi / 7. Seven recurrence peaks in (0, 2 pi], the
/// last one shared by both branches.
pub fn two_branch() -> ScenarioConfig {
    ScenarioConfig {
        oscillator: OscillatorConfig {
            mass: 1.0,
            hbar: 1.0,
            vx: 12.25,
            vy: 0.25,
            kappa_x: 0.0,
            kappa_y: 0.0,
            omega_x: 0.0,
            omega_y: 0.0,
        },
        branches: vec![
            BranchConfig { p0: [3.5, 3.5], weight: 1.0 },
            BranchConfig { p0: [7.0, 0.0], weight: 1.0 },
        ],
        q0: [0.0, 0.0],
        alpha0: Some(SQRT2),
        normalize_weights: true,
        time: TimeConfig { t0: 0.0, t1: 2.0 * PI + 0.3, samples: 600 },
        seed: 11,
        tolerances: ToleranceConfig::default(),
        weak: None,
        bohm: Some(BohmConfig {
            points: vec![[0.01, 0.09], [0.01, -0.08]],
            t0: 0.0,
            t1: 2.0 * PI,
            max_displacement_frac: None,
            max_step: None,
        }),
        ensemble: Some(EnsembleConfig { n: 2000, t0: 0.0, t1: 0.35, grid: [40, 40] }),
        recurrence: Some(RecurrenceConfig {
            center: [0.0, 0.0],
            radius: None,
            t_samples: 800,
            prominence: None,
        }),
        momentum_grid: None,
        propagator_check: None,
        identity_check: Some(IdentityCheckConfig { times: vec![0.5, 1.7] }),
    }
}

/// Three branches leaving the origin at |p0| = 6 in directions 90, 210 and
/// 330 degrees, all returning at t = pi. The weak block postselects onto
/// branch 0 and sweeps a 40 x 40 probe lattice over 20 interaction times.
pub fn three_branch() -> ScenarioConfig {
    let dirs = [90.0f64, 210.0, 330.0];
    let branches = dirs
        .iter()
        .map(|deg| {
            let th = deg.to_radians();
            BranchConfig { p0: [6.0 * th.cos(), 6.0 * th.sin()], weight: 1.0 }
        })
        .collect();
    ScenarioConfig {
        oscillator: OscillatorConfig {
            mass: 1.0,
            hbar: 1.0,
            vx: 1.0,
            vy: 1.0,
            kappa_x: 0.0,
            kappa_y: 0.0,
            omega_x: 0.0,
            omega_y: 0.0,
        },
        branches,
        q0: [0.0, 0.0],
        alpha0: Some(SQRT2),
        normalize_weights: true,
        time: TimeConfig { t0: 0.0, t1: PI + 0.2, samples: 400 },
        seed: 23,
        tolerances: ToleranceConfig::default(),
        weak: Some(WeakConfig {
            postselection: PostselectionConfig::BranchMatched { branch: 0 },
            grid_x: GridConfig { min: -11.0, max: 11.0, count: 40 },
            grid_y: GridConfig { min: -11.0, max: 11.0, count: 40 },
            times: TimesConfig { start: 1.0, stop: 2.05, count: 20 },
            window_width: None,
            cross_check_stride: None,
            max_assignment_distance_w: None,
        }),
        bohm: Some(BohmConfig {
            points: vec![[0.05, 0.1]],
            t0: 0.0,
            t1: 3.0,
            max_displacement_frac: None,
            max_step: None,
        }),
        ensemble: Some(EnsembleConfig { n: 2000, t0: 0.0, t1: 0.4, grid: [40, 40] }),
        recurrence: Some(RecurrenceConfig {
            center: [0.0, 0.0],
            radius: None,
            t_samples: 500,
            prominence: None,
        }),
        momentum_grid: None,
        propagator_check: None,
        identity_check: Some(IdentityCheckConfig { times: vec![0.9, 1.6] }),
    }
}

/// Preset lookup by name.
pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "static_reference" => Some(static_reference()),
        "two_branch" => Some(two_branch()),
        "three_branch" => Some(three_branch()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["static_reference", "two_branch", "three_branch"];
