//! Command implementations: each builds the state from the resolved config,
//! runs one pipeline and emits CSV tables plus a manifest.

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use std::path::Path;

use tdho_core::ermakov::{integrate_ermakov, ErmakovInit};
use tdho_core::flow::{histogram_l1, integrate_bohmian, transport_ensemble, BohmianControls, Termination};
use tdho_core::observables::{classical_crossings, recurrence_spectrum, Region};
use tdho_core::ode::OdeOptions;
use tdho_core::params::{AxisPotential, OscillatorParams};
use tdho_core::quadrature::integrate_1d;
use tdho_core::vec2::{Axis, Vec2};
use tdho_core::wavepacket::propagator::propagator_1d_eps;
use tdho_core::wavepacket::Superposition;
use tdho_core::weak::{
    assemble_weak_trajectories, run_wma_grid, weak_momentum_two_point, weak_momentum_value,
    wma_lattice, CrossCheck, Observable, PostselectionState, WeakThresholds,
};

use crate::config::{PostselectionConfig, ScenarioConfig};
use crate::output::{write_manifest, Csv, Field, Manifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Bohm,
    Ensemble,
    WeakTraj,
    WeakMomentum,
    Recurrence,
    PropagatorCheck,
    IdentityCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bohm => "bohm",
            Command::Ensemble => "ensemble",
            Command::WeakTraj => "weak-traj",
            Command::WeakMomentum => "weak-momentum",
            Command::Recurrence => "recurrence",
            Command::PropagatorCheck => "propagator-check",
            Command::IdentityCheck => "identity-check",
        }
    }
}

pub fn oscillator_params(cfg: &ScenarioConfig) -> Result<OscillatorParams<f64>> {
    let o = &cfg.oscillator;
    Ok(OscillatorParams::new(
        o.mass,
        o.hbar,
        AxisPotential { v: o.vx, kappa: o.kappa_x, omega: o.omega_x },
        AxisPotential { v: o.vy, kappa: o.kappa_y, omega: o.omega_y },
    )?)
}

fn ode_options(cfg: &ScenarioConfig) -> OdeOptions<f64> {
    OdeOptions::with_tolerances(cfg.tolerances.rtol, cfg.tolerances.atol)
}

fn thresholds(cfg: &ScenarioConfig) -> WeakThresholds<f64> {
    WeakThresholds {
        compatibility: cfg.tolerances.overlap_threshold,
        numerator: cfg.tolerances.numerator_threshold,
        route_agreement: cfg.tolerances.route_agreement,
        ..WeakThresholds::default()
    }
}

/// Latest time any block of the config can query.
fn span_end(cfg: &ScenarioConfig) -> f64 {
    let mut hi = cfg.time.t1;
    if let Some(w) = &cfg.weak {
        hi = hi.max(w.times.stop);
        match &w.postselection {
            PostselectionConfig::Gaussian { t_f, .. }
            | PostselectionConfig::MultiBranch { t_f, .. } => hi = hi.max(*t_f),
            PostselectionConfig::BranchMatched { .. } => {}
        }
    }
    if let Some(b) = &cfg.bohm {
        hi = hi.max(b.t0).max(b.t1);
    }
    if let Some(e) = &cfg.ensemble {
        hi = hi.max(e.t0).max(e.t1);
    }
    if let Some(m) = &cfg.momentum_grid {
        hi = hi.max(m.times.stop);
    }
    if let Some(p) = &cfg.propagator_check {
        for &t in &p.times {
            hi = hi.max(cfg.time.t0 + t);
        }
    }
    if let Some(i) = &cfg.identity_check {
        for &t in &i.times {
            hi = hi.max(t);
        }
    }
    hi
}

/// Build the preselected state from the resolved config.
pub fn build_state(cfg: &ScenarioConfig) -> Result<(Superposition<f64>, Vec<String>)> {
    let params = oscillator_params(cfg)?;
    let alpha0 = cfg.alpha0();
    let opts = ode_options(cfg);
    let t0 = cfg.time.t0;
    let t1 = span_end(cfg) + 1e-9;
    let mut parts = Vec::with_capacity(cfg.branches.len());
    let mut warnings = Vec::new();
    for (j, b) in cfg.branches.iter().enumerate() {
        let init = ErmakovInit::uniform(
            Vec2::new(cfg.q0[0], cfg.q0[1]),
            Vec2::new(b.p0[0], b.p0[1]),
            alpha0,
        );
        let traj = integrate_ermakov(&params, &init, t0, t1, &opts)?;
        if let Some(w) = traj.stability_warning() {
            warnings.push(format!("branch {j}: {w}"));
        }
        parts.push((b.weight, traj));
    }
    let mut state = Superposition::new(params, parts)?;
    if cfg.normalize_weights {
        state = state.normalized(t0)?;
    }
    Ok((state, warnings))
}

fn time_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    let n = cfg.time.samples;
    (0..n)
        .map(|i| cfg.time.t0 + (cfg.time.t1 - cfg.time.t0) * i as f64 / (n - 1) as f64)
        .collect()
}

pub struct RunOutput {
    pub files: Vec<String>,
    pub summary: Value,
}

/// Execute one command against a resolved config, writing outputs into
/// `out_dir`. Returns the list of files written and the summary embedded in
/// the manifest.
pub fn run(
    command: Command,
    cfg: &ScenarioConfig,
    out_dir: &Path,
    threads: usize,
    tolerance_scale: f64,
) -> Result<RunOutput> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let (state, warnings) = build_state(cfg)?;

    let (tables, summary) = match command {
        Command::Simulate => cmd_simulate(cfg, &state)?,
        Command::Bohm => cmd_bohm(cfg, &state)?,
        Command::Ensemble => cmd_ensemble(cfg, &state)?,
        Command::WeakTraj => cmd_weak_traj(cfg, &state)?,
        Command::WeakMomentum => cmd_weak_momentum(cfg, &state)?,
        Command::Recurrence => cmd_recurrence(cfg, &state)?,
        Command::PropagatorCheck => cmd_propagator_check(cfg, &state)?,
        Command::IdentityCheck => cmd_identity_check(cfg, &state)?,
    };

    let mut files = Vec::new();
    for table in &tables {
        let path = table.write_to(out_dir)?;
        files.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        command: command.name().to_string(),
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        threads,
        tolerance_scale,
        config: cfg.clone(),
        outputs: files.clone(),
        warnings,
        summary: summary.clone(),
    };
    write_manifest(out_dir, &manifest)?;
    files.push("run_manifest.json".into());
    Ok(RunOutput { files, summary })
}

fn cmd_simulate(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let times = time_grid(cfg);
    let mut traj_csv = Csv::new(
        "trajectories.csv",
        &[
            "branch", "t", "qx", "qy", "px", "py", "alpha_x", "alpha_dot_x", "phi_x", "alpha_y",
            "alpha_dot_y", "phi_y",
        ],
    );
    for (j, b) in state.branches().iter().enumerate() {
        for &t in &times {
            let sx = b.traj.state_at(Axis::X, t)?;
            let sy = b.traj.state_at(Axis::Y, t)?;
            traj_csv.row(&[
                Field::I(j as i64),
                Field::F(t),
                Field::F(sx.q),
                Field::F(sy.q),
                Field::F(sx.p),
                Field::F(sy.p),
                Field::F(sx.alpha),
                Field::F(sx.alpha_dot),
                Field::F(sx.phi),
                Field::F(sy.alpha),
                Field::F(sy.alpha_dot),
                Field::F(sy.phi),
            ]);
        }
    }
    let mut norm_csv = Csv::new("norm.csv", &["t", "total_norm"]);
    let mut max_dev: f64 = 0.0;
    let norm0 = state.total_norm(times[0])?;
    for &t in times.iter().step_by((times.len() / 32).max(1)) {
        let n = state.total_norm(t)?;
        max_dev = max_dev.max((n - norm0).abs());
        norm_csv.row(&[Field::F(t), Field::F(n)]);
    }
    let summary = json!({
        "branches": state.branches().len(),
        "samples": times.len(),
        "total_norm_t0": norm0,
        "max_norm_drift": max_dev,
    });
    Ok((vec![traj_csv, norm_csv], summary))
}

fn bohm_controls(cfg: &ScenarioConfig) -> BohmianControls<f64> {
    let mut controls = BohmianControls {
        rtol: cfg.tolerances.rtol,
        atol: cfg.tolerances.atol,
        ..BohmianControls::default()
    };
    if let Some(b) = &cfg.bohm {
        if let Some(frac) = b.max_displacement_frac {
            controls.max_displacement = Some(frac * cfg.alpha0());
        }
        controls.max_step = b.max_step;
    }
    controls
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::TimeReached => "time_reached".into(),
        Termination::SingularRegion { .. } => "singular_region".into(),
        Termination::StepFailure { .. } => "step_failure".into(),
    }
}

fn cmd_bohm(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(bohm) = &cfg.bohm else { bail!("config has no `bohm` block") };
    let controls = bohm_controls(cfg);
    let mut csv = Csv::new("bohm_trajectories.csv", &["traj_id", "t", "x", "y", "vx", "vy"]);
    let mut term_csv = Csv::new("bohm_terminations.csv", &["traj_id", "x0", "y0", "termination", "t_end"]);
    let mut terminations = Vec::new();
    for (id, p) in bohm.points.iter().enumerate() {
        let traj = integrate_bohmian(state, Vec2::new(p[0], p[1]), bohm.t0, bohm.t1, &controls)?;
        for s in &traj.samples {
            csv.row(&[
                Field::I(id as i64),
                Field::F(s.t),
                Field::F(s.r.x),
                Field::F(s.r.y),
                Field::F(s.v.x),
                Field::F(s.v.y),
            ]);
        }
        let label = termination_label(&traj.termination);
        term_csv.row(&[
            Field::I(id as i64),
            Field::F(p[0]),
            Field::F(p[1]),
            Field::S(label.clone()),
            Field::F(traj.end().t),
        ]);
        terminations.push(label);
    }
    let summary = json!({
        "trajectories": bohm.points.len(),
        "terminations": terminations,
    });
    Ok((vec![csv, term_csv], summary))
}

fn cmd_ensemble(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(e) = &cfg.ensemble else { bail!("config has no `ensemble` block") };
    let controls = bohm_controls(cfg);
    let ensemble = transport_ensemble(state, e.n, e.t0, e.t1, cfg.seed, &controls)?;
    let mut csv = Csv::new("ensemble.csv", &["id", "x0", "y0", "x1", "y1", "reached"]);
    let mut finals = Vec::new();
    let mut n_failed = 0usize;
    for (id, (start, traj)) in ensemble.initial.iter().zip(&ensemble.trajectories).enumerate() {
        let reached = traj.reached();
        let end = traj.end();
        if reached {
            finals.push(end.r);
        } else {
            n_failed += 1;
        }
        csv.row(&[
            Field::I(id as i64),
            Field::F(start.x),
            Field::F(start.y),
            Field::F(end.r.x),
            Field::F(end.r.y),
            Field::I(reached as i64),
        ]);
    }
    let report = histogram_l1(state, &finals, e.t1, (e.grid[0], e.grid[1]))?;
    let summary = json!({
        "n": e.n,
        "n_failed": n_failed,
        "l1": report.l1,
        "grid": [report.grid.0, report.grid.1],
        "box": {
            "lo": [report.rect.lo.x, report.rect.lo.y],
            "hi": [report.rect.hi.x, report.rect.hi.y],
        },
        "seed": cfg.seed,
    });
    Ok((vec![csv], summary))
}

fn postselection_state(cfg: &ScenarioConfig) -> Result<PostselectionState<f64>> {
    let Some(w) = &cfg.weak else { bail!("config has no `weak` block") };
    let def_delta = cfg.alpha0() / cfg.oscillator.mass.sqrt();
    Ok(match &w.postselection {
        PostselectionConfig::BranchMatched { branch } => {
            PostselectionState::BranchMatched { branch: *branch }
        }
        PostselectionConfig::Gaussian { r_f, p_f, delta_f, t_f } => {
            PostselectionState::GaussianPacket {
                r_f: Vec2::new(r_f[0], r_f[1]),
                p_f: Vec2::new(p_f[0], p_f[1]),
                delta_f: delta_f.unwrap_or(def_delta),
                t_f: *t_f,
            }
        }
        PostselectionConfig::MultiBranch { r_f, delta_f, t_f, components } => {
            PostselectionState::MultiBranch {
                components: components
                    .iter()
                    .map(|c| (num_complex::Complex64::new(c.c[0], c.c[1]), Vec2::new(c.p_f[0], c.p_f[1])))
                    .collect(),
                r_f: Vec2::new(r_f[0], r_f[1]),
                delta_f: delta_f.unwrap_or(def_delta),
                t_f: *t_f,
            }
        }
    })
}

fn cmd_weak_traj(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(w) = &cfg.weak else { bail!("config has no `weak` block") };
    let width = w.window_width.unwrap_or(cfg.alpha0() / 4.0);
    let post = postselection_state(cfg)?;
    let opts = ode_options(cfg);
    let chi = post.backward_state(state, cfg.time.t0, &opts)?;

    let times = w.times.values();
    let grid = wma_lattice(
        (w.grid_x.min, w.grid_x.max, w.grid_x.count),
        (w.grid_y.min, w.grid_y.max, w.grid_y.count),
        &times,
        width,
    );
    let stride = w.cross_check_stride.unwrap_or(13);
    let cross = if stride == 0 { CrossCheck::Never } else { CrossCheck::Stride(stride) };
    let records = run_wma_grid(state, &chi, &grid, &thresholds(cfg), cross)?;
    let max_dist = w.max_assignment_distance_w.unwrap_or(20.0);
    let outcome = assemble_weak_trajectories(&records, state, width, max_dist)?;

    let mut rec_csv = Csv::new(
        "weak_records.csv",
        &[
            "wma_id", "t_k", "R0x", "R0y", "Re_wx", "Im_wx", "Re_wy", "Im_wy", "norm_overlap",
            "branch", "vanishing_flag",
        ],
    );
    for (rec, assigned) in records.iter().zip(&outcome.assignments) {
        rec_csv.row(&[
            Field::I(rec.wma_id as i64),
            Field::F(rec.t_k),
            Field::F(rec.r0.x),
            Field::F(rec.r0.y),
            Field::F(rec.value.x.re),
            Field::F(rec.value.x.im),
            Field::F(rec.value.y.re),
            Field::F(rec.value.y.im),
            Field::F(rec.normalization.norm()),
            Field::I(assigned.map(|b| b as i64).unwrap_or(-1)),
            Field::I(i64::from(rec.vanishing())),
        ]);
    }
    let mut traj_csv = Csv::new(
        "weak_trajectories.csv",
        &["branch", "t_k", "x", "y", "n_records", "weight"],
    );
    for wt in &outcome.trajectories {
        for pt in &wt.points {
            traj_csv.row(&[
                Field::I(wt.branch as i64),
                Field::F(pt.t_k),
                Field::F(pt.position.x),
                Field::F(pt.position.y),
                Field::I(pt.n_records as i64),
                Field::F(pt.weight),
            ]);
        }
    }
    let n_eligible = records.iter().filter(|r| r.assembly_eligible()).count();
    let n_vanishing = records.iter().filter(|r| r.vanishing()).count();
    let summary = json!({
        "probes": records.len(),
        "eligible": n_eligible,
        "vanishing": n_vanishing,
        "unassigned": outcome.unassigned.len(),
        "trajectories": outcome.trajectories.iter().map(|t| json!({
            "branch": t.branch,
            "points": t.points.len(),
        })).collect::<Vec<_>>(),
        "window_width": width,
    });
    Ok((vec![rec_csv, traj_csv], summary))
}

fn cmd_weak_momentum(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(m) = &cfg.momentum_grid else { bail!("config has no `momentum_grid` block") };
    let mut csv = Csv::new(
        "weak_momentum.csv",
        &[
            "x", "y", "t", "Re_px", "Im_px", "Re_py", "Im_py", "vx", "vy", "rho", "singular_flag",
        ],
    );
    let mut tp_csv = m.epsilon.map(|_| {
        Csv::new(
            "weak_momentum_two_point.csv",
            &["x", "y", "t", "eps", "Re_px", "Im_px", "Re_py", "Im_py", "rel_deviation"],
        )
    });
    let xs: Vec<f64> = (0..m.grid_x.count)
        .map(|i| {
            m.grid_x.min
                + (m.grid_x.max - m.grid_x.min) * i as f64 / (m.grid_x.count.max(2) - 1) as f64
        })
        .collect();
    let ys: Vec<f64> = (0..m.grid_y.count)
        .map(|i| {
            m.grid_y.min
                + (m.grid_y.max - m.grid_y.min) * i as f64 / (m.grid_y.count.max(2) - 1) as f64
        })
        .collect();
    let mut n_singular = 0usize;
    for &t in &m.times.values() {
        let frozen = state.frozen_at(t)?;
        for &y in &ys {
            for &x in &xs {
                let r = Vec2::new(x, y);
                let d = frozen.density(r);
                match weak_momentum_value(state, r, t) {
                    Ok(p) => {
                        let v = Vec2::new(p.x.re, p.y.re) / state.params.mass;
                        csv.row(&[
                            Field::F(x),
                            Field::F(y),
                            Field::F(t),
                            Field::F(p.x.re),
                            Field::F(p.x.im),
                            Field::F(p.y.re),
                            Field::F(p.y.im),
                            Field::F(v.x),
                            Field::F(v.y),
                            Field::F(d),
                            Field::I(0),
                        ]);
                        if let (Some(csv2), Some(eps)) = (tp_csv.as_mut(), m.epsilon) {
                            let tp = weak_momentum_two_point(state, r, t, eps)?;
                            let scale = (p.x.norm_sqr() + p.y.norm_sqr()).sqrt().max(1e-12);
                            let dev = ((tp.x - p.x).norm_sqr() + (tp.y - p.y).norm_sqr()).sqrt() / scale;
                            csv2.row(&[
                                Field::F(x),
                                Field::F(y),
                                Field::F(t),
                                Field::F(eps),
                                Field::F(tp.x.re),
                                Field::F(tp.x.im),
                                Field::F(tp.y.re),
                                Field::F(tp.y.im),
                                Field::F(dev),
                            ]);
                        }
                    }
                    Err(tdho_core::CoreError::SingularRegion { .. }) => {
                        n_singular += 1;
                        csv.row(&[
                            Field::F(x),
                            Field::F(y),
                            Field::F(t),
                            Field::F(0.0),
                            Field::F(0.0),
                            Field::F(0.0),
                            Field::F(0.0),
                            Field::F(0.0),
                            Field::F(0.0),
                            Field::F(d),
                            Field::I(1),
                        ]);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    let summary = json!({
        "points": xs.len() * ys.len() * m.times.count,
        "singular": n_singular,
        "epsilon": m.epsilon,
    });
    let mut tables = vec![csv];
    if let Some(c) = tp_csv {
        tables.push(c);
    }
    Ok((tables, summary))
}

fn cmd_recurrence(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(r) = &cfg.recurrence else { bail!("config has no `recurrence` block") };
    let radius = r.radius.unwrap_or(0.25 * cfg.alpha0());
    let prominence = r.prominence.unwrap_or(0.05);
    let region = Region { center: Vec2::new(r.center[0], r.center[1]), radius };
    // Skip the initial blob: the spectrum starts a little inside the span.
    let t_lo = cfg.time.t0 + (cfg.time.t1 - cfg.time.t0) * 0.02;
    let times: Vec<f64> = (0..r.t_samples)
        .map(|i| t_lo + (cfg.time.t1 - t_lo) * i as f64 / (r.t_samples - 1) as f64)
        .collect();
    let spec = recurrence_spectrum(state, region, &times, prominence)?;

    let trajs: Vec<(usize, _)> = state
        .branches()
        .iter()
        .enumerate()
        .map(|(j, b)| (j, &b.traj))
        .collect();
    let crossings = classical_crossings(&trajs, region.center, radius, t_lo, cfg.time.t1)?;

    let mut spec_csv = Csv::new("recurrence_spectrum.csv", &["t", "P"]);
    for (t, p) in spec.times.iter().zip(&spec.mass) {
        spec_csv.row(&[Field::F(*t), Field::F(*p)]);
    }
    let mut peak_csv = Csv::new("recurrence_peaks.csv", &["t_rec", "height"]);
    for &(t, h) in &spec.peaks {
        peak_csv.row(&[Field::F(t), Field::F(h)]);
    }
    let mut cross_csv = Csv::new("classical_crossings.csv", &["t", "branch"]);
    for &(t, j) in &crossings {
        cross_csv.row(&[Field::F(t), Field::I(j as i64)]);
    }

    let dt = times[1] - times[0];
    let mut worst_peak_gap: f64 = 0.0;
    for &(t_rec, _) in &spec.peaks {
        let nearest = crossings.iter().map(|c| (c.0 - t_rec).abs()).fold(f64::INFINITY, f64::min);
        worst_peak_gap = worst_peak_gap.max(nearest);
    }
    let mut worst_crossing_gap: f64 = 0.0;
    for &(t_c, _) in &crossings {
        let nearest = spec.peaks.iter().map(|p| (p.0 - t_c).abs()).fold(f64::INFINITY, f64::min);
        worst_crossing_gap = worst_crossing_gap.max(nearest);
    }
    let summary = json!({
        "peaks": spec.peaks.len(),
        "crossings": crossings.len(),
        "grid_dt": dt,
        "worst_peak_to_crossing": worst_peak_gap,
        "worst_crossing_to_peak": worst_crossing_gap,
        "region": {"center": [region.center.x, region.center.y], "radius": radius},
    });
    Ok((vec![spec_csv, peak_csv, cross_csv], summary))
}

fn cmd_propagator_check(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(p) = &cfg.propagator_check else { bail!("config has no `propagator_check` block") };
    let t0 = cfg.time.t0;
    let caustic_eps = cfg.tolerances.caustic_epsilon;
    let quad_tol = cfg.tolerances.quadrature;
    let mut err_csv = Csv::new("propagator_errors.csv", &["axis", "t1", "x", "abs_err"]);
    let mut worst_overall: f64 = 0.0;
    let mut per_run = Vec::new();
    for &dt in &p.times {
        let t1 = t0 + dt;
        let frozen0 = state.frozen_at(t0)?;
        let frozen1 = state.frozen_at(t1)?;
        for axis in Axis::BOTH {
            let g0 = frozen0.branch_quadratic(0, axis);
            let g1 = frozen1.branch_quadratic(0, axis);
            let traj = &state.branches()[0].traj;
            let half = (p.x_max - p.x_min).abs() + 9.0;
            let mut worst: f64 = 0.0;
            for i in 0..p.x_count {
                let x = p.x_min + (p.x_max - p.x_min) * i as f64 / (p.x_count - 1) as f64;
                let integral = integrate_1d(
                    |x0| {
                        propagator_1d_eps(traj, axis, x, t1, x0, t0, caustic_eps)
                            .map(|k| k * g0.eval(x0))
                            .unwrap_or_default()
                    },
                    -half,
                    half,
                    quad_tol,
                );
                let err = (integral - g1.eval(x)).norm();
                worst = worst.max(err);
                err_csv.row(&[
                    Field::S(format!("{axis:?}").to_lowercase()),
                    Field::F(t1),
                    Field::F(x),
                    Field::F(err),
                ]);
            }
            worst_overall = worst_overall.max(worst);
            per_run.push(json!({
                "axis": format!("{axis:?}").to_lowercase(),
                "t1": t1,
                "max_abs_err": worst,
            }));
        }
    }
    let summary = json!({
        "max_reproduction_error": worst_overall,
        "runs": per_run,
    });
    Ok((vec![err_csv], summary))
}

fn cmd_identity_check(cfg: &ScenarioConfig, state: &Superposition<f64>) -> Result<(Vec<Csv>, Value)> {
    let Some(ic) = &cfg.identity_check else { bail!("config has no `identity_check` block") };
    let mut csv = Csv::new(
        "identity_check.csv",
        &["observable", "t", "residual_x", "residual_y"],
    );
    let mut worst: f64 = 0.0;
    for &t in &ic.times {
        for (name, obs) in [("position", Observable::Position), ("momentum", Observable::Momentum)] {
            let res = tdho_core::weak::expectation_identity_check(state, obs, t)?;
            worst = worst.max(res.norm());
            csv.row(&[Field::S(name.into()), Field::F(t), Field::F(res.x), Field::F(res.y)]);
        }
    }
    let summary = json!({ "max_residual": worst });
    Ok((vec![csv], summary))
}
