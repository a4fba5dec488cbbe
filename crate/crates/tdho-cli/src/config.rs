//! Scenario configuration: JSON schema, validation and default resolution.
//!
//! A loaded config is resolved into a form with every default made explicit;
//! the resolved form is what runs and what the manifest echoes, so no hidden
//! defaults can influence an output file.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    pub mass: f64,
    pub hbar: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(default)]
    pub kappa_x: f64,
    #[serde(default)]
    pub kappa_y: f64,
    #[serde(default)]
    pub omega_x: f64,
    #[serde(default)]
    pub omega_y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub p0: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t0: 0.0, t1: 2.0 * std::f64::consts::PI, samples: 400 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Relative tolerance of the trajectory/streamline integrators.
    pub rtol: f64,
    /// Absolute tolerance of the trajectory/streamline integrators.
    pub atol: f64,
    /// Target of adaptive quadratures.
    pub quadrature: f64,
    /// Compatibility floor on |<chi|psi>|.
    pub overlap_threshold: f64,
    /// Floor on windowed weak-value moments.
    pub numerator_threshold: f64,
    /// Relative agreement between analytic and quadrature weak values.
    pub route_agreement: f64,
    /// Caustic exclusion half-width (radians of Ermakov phase).
    pub caustic_epsilon: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            quadrature: 1e-9,
            overlap_threshold: 1e-8,
            numerator_threshold: 1e-8,
            route_agreement: 1e-6,
            caustic_epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl TimesConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    /// Complex coefficient as [re, im].
    pub c: [f64; 2],
    pub p_f: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PostselectionConfig {
    BranchMatched {
        branch: usize,
    },
    Gaussian {
        r_f: [f64; 2],
        p_f: [f64; 2],
        /// Defaults to alpha0 / sqrt(mass).
        delta_f: Option<f64>,
        t_f: f64,
    },
    MultiBranch {
        r_f: [f64; 2],
        delta_f: Option<f64>,
        t_f: f64,
        components: Vec<ComponentConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakConfig {
    pub postselection: PostselectionConfig,
    pub grid_x: GridConfig,
    pub grid_y: GridConfig,
    pub times: TimesConfig,
    /// Window width; defaults to alpha0 / 4.
    pub window_width: Option<f64>,
    /// Cross-check every n-th record by quadrature (0 disables).
    pub cross_check_stride: Option<usize>,
    /// Assembly cutoff in window widths.
    pub max_assignment_distance_w: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BohmConfig {
    pub points: Vec<[f64; 2]>,
    pub t0: f64,
    pub t1: f64,
    /// Displacement cap per step as a fraction of alpha0.
    pub max_displacement_frac: Option<f64>,
    /// Time-step cap (bounds sample spacing).
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    pub t0: f64,
    pub t1: f64,
    pub grid: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceConfig {
    pub center: [f64; 2],
    /// Defaults to 0.25 alpha0.
    pub radius: Option<f64>,
    pub t_samples: usize,
    /// Peak prominence as a fraction of max P.
    pub prominence: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumGridConfig {
    pub grid_x: GridConfig,
    pub grid_y: GridConfig,
    pub times: TimesConfig,
    /// Two-point comparison interval; omitted disables the comparison
    /// columns.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorCheckConfig {
    pub times: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityCheckConfig {
    pub times: Vec<f64>,
}

/// Top-level scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub oscillator: OscillatorConfig,
    pub branches: Vec<BranchConfig>,
    #[serde(default)]
    pub q0: [f64; 2],
    /// Defaults to the static fixed-point width of the x axis.
    #[serde(default)]
    pub alpha0: Option<f64>,
    /// Rescale weights so the total norm (cross terms included) is one.
    #[serde(default)]
    pub normalize_weights: bool,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub weak: Option<WeakConfig>,
    #[serde(default)]
    pub bohm: Option<BohmConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub recurrence: Option<RecurrenceConfig>,
    #[serde(default)]
    pub momentum_grid: Option<MomentumGridConfig>,
    #[serde(default)]
    pub propagator_check: Option<PropagatorCheckConfig>,
    #[serde(default)]
    pub identity_check: Option<IdentityCheckConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid configuration:\n{}", violations.join("\n"))]
    Validation { violations: Vec<String> },
}

impl ScenarioConfig {
    /// Load, parse and validate; every violation is reported at once.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let o = &self.oscillator;
        if !(o.mass > 0.0) {
            v.push(format!("oscillator.mass must be > 0 (got {})", o.mass));
        }
        if !(o.hbar > 0.0) {
            v.push(format!("oscillator.hbar must be > 0 (got {})", o.hbar));
        }
        for (name, vv, kappa) in [("x", o.vx, o.kappa_x), ("y", o.vy, o.kappa_y)] {
            if kappa == 0.0 && !(vv > 0.0) {
                v.push(format!("oscillator.v{name} must be > 0 on a static axis (got {vv})"));
            }
        }
        if o.omega_x < 0.0 || o.omega_y < 0.0 {
            v.push("oscillator.omega_x/omega_y must be >= 0".into());
        }
        if self.branches.is_empty() {
            v.push("at least one branch is required".into());
        }
        if self.branches.iter().all(|b| b.weight == 0.0) && !self.branches.is_empty() {
            v.push("all branch weights are zero".into());
        }
        if let Some(a0) = self.alpha0 {
            if !(a0 > 0.0) {
                v.push(format!("alpha0 must be > 0 (got {a0})"));
            }
        } else if !(o.vx > 0.0) {
            v.push("alpha0 default needs vx > 0; set alpha0 explicitly".into());
        }
        if self.time.t1 == self.time.t0 {
            v.push("time.t1 must differ from time.t0".into());
        }
        if self.time.samples < 2 {
            v.push("time.samples must be >= 2".into());
        }
        let t = &self.tolerances;
        for (name, val) in [
            ("rtol", t.rtol),
            ("atol", t.atol),
            ("quadrature", t.quadrature),
            ("overlap_threshold", t.overlap_threshold),
            ("numerator_threshold", t.numerator_threshold),
            ("route_agreement", t.route_agreement),
            ("caustic_epsilon", t.caustic_epsilon),
        ] {
            if !(val > 0.0) {
                v.push(format!("tolerances.{name} must be > 0 (got {val})"));
            }
        }
        if let Some(w) = &self.weak {
            if let Some(ww) = w.window_width {
                if !(ww > 0.0) {
                    v.push(format!("weak.window_width must be > 0 (got {ww})"));
                }
            }
            if w.grid_x.count == 0 || w.grid_y.count == 0 || w.times.count == 0 {
                v.push("weak grid/time counts must be >= 1".into());
            }
            if let PostselectionConfig::MultiBranch { components, .. } = &w.postselection {
                if components.is_empty() || components.iter().all(|c| c.c == [0.0, 0.0]) {
                    v.push("weak.postselection multi_branch needs a nonzero component".into());
                }
            }
            if let PostselectionConfig::BranchMatched { branch } = &w.postselection {
                if *branch >= self.branches.len() {
                    v.push(format!(
                        "weak.postselection branch {} out of range ({} branches)",
                        branch,
                        self.branches.len()
                    ));
                }
            }
            for (name, d) in [
                (
                    "gaussian",
                    match &w.postselection {
                        PostselectionConfig::Gaussian { delta_f, .. } => *delta_f,
                        _ => None,
                    },
                ),
                (
                    "multi_branch",
                    match &w.postselection {
                        PostselectionConfig::MultiBranch { delta_f, .. } => *delta_f,
                        _ => None,
                    },
                ),
            ] {
                if let Some(d) = d {
                    if !(d > 0.0) {
                        v.push(format!("weak.postselection {name} delta_f must be > 0 (got {d})"));
                    }
                }
            }
        }
        if let Some(e) = &self.ensemble {
            if e.n < 100 {
                v.push(format!("ensemble.n must be >= 100 (got {})", e.n));
            }
            if e.grid[0] == 0 || e.grid[1] == 0 {
                v.push("ensemble.grid entries must be >= 1".into());
            }
        }
        if let Some(r) = &self.recurrence {
            if let Some(rad) = r.radius {
                if !(rad > 0.0) {
                    v.push(format!("recurrence.radius must be > 0 (got {rad})"));
                }
            }
            if r.t_samples < 3 {
                v.push("recurrence.t_samples must be >= 3".into());
            }
        }
        if let Some(p) = &self.propagator_check {
            if p.times.is_empty() {
                v.push("propagator_check.times must not be empty".into());
            }
            if p.x_count < 2 {
                v.push("propagator_check.x_count must be >= 2".into());
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation { violations: v })
        }
    }

    /// The configured width or its static fixed-point default.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
            .unwrap_or_else(|| (2.0 * self.oscillator.hbar / self.oscillator.vx.sqrt()).sqrt())
    }

    /// Copy with every optional default made explicit (what the manifest
    /// echoes).
    pub fn resolved(&self, seed_override: Option<u64>, tolerance_scale: f64) -> ScenarioConfig {
        let mut out = self.clone();
        out.alpha0 = Some(self.alpha0());
        if let Some(seed) = seed_override {
            out.seed = seed;
        }
        out.tolerances.rtol *= tolerance_scale;
        out.tolerances.atol *= tolerance_scale;
        out.tolerances.quadrature *= tolerance_scale;
        let alpha0 = out.alpha0.unwrap();
        if let Some(w) = &mut out.weak {
            w.window_width = Some(w.window_width.unwrap_or(alpha0 / 4.0));
            w.cross_check_stride = Some(w.cross_check_stride.unwrap_or(13));
            w.max_assignment_distance_w = Some(w.max_assignment_distance_w.unwrap_or(20.0));
            let mass = out.oscillator.mass;
            let def_delta = alpha0 / mass.sqrt();
            match &mut w.postselection {
                PostselectionConfig::Gaussian { delta_f, .. } => {
                    *delta_f = Some(delta_f.unwrap_or(def_delta));
                }
                PostselectionConfig::MultiBranch { delta_f, .. } => {
                    *delta_f = Some(delta_f.unwrap_or(def_delta));
                }
                PostselectionConfig::BranchMatched { .. } => {}
            }
        }
        if let Some(b) = &mut out.bohm {
            b.max_displacement_frac = Some(b.max_displacement_frac.unwrap_or(0.01));
        }
        if let Some(r) = &mut out.recurrence {
            r.radius = Some(r.radius.unwrap_or(0.25 * alpha0));
            r.prominence = Some(r.prominence.unwrap_or(0.05));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "oscillator": {"mass": 1.0, "hbar": 1.0, "vx": 1.0, "vy": 1.0},
            "branches": [{"p0": [1.0, 0.0], "weight": 1.0}]
        }"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.validate().unwrap();
        let resolved = cfg.resolved(None, 1.0);
        assert!((resolved.alpha0.unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(resolved.seed, 0);
        assert_eq!(resolved.time.samples, 400);
    }

    #[test]
    fn negative_kappa_accepted() {
        let json = r#"{
            "oscillator": {"mass": 1.0, "hbar": 1.0, "vx": 1.0, "vy": 1.0, "kappa_x": -0.3, "omega_x": 1.0},
            "branches": [{"p0": [1.0, 0.0], "weight": 1.0}]
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_alpha0_rejected_with_all_violations() {
        let json = r#"{
            "oscillator": {"mass": -1.0, "hbar": 1.0, "vx": 1.0, "vy": 1.0},
            "branches": [],
            "alpha0": -2.0
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        match cfg.validate() {
            Err(ConfigError::Validation { violations }) => {
                assert!(violations.len() >= 3, "violations: {violations:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{
            "oscillator": {"mass": 1.0, "hbar": 1.0, "vx": 1.0, "vy": 1.0},
            "branches": [{"p0": [1.0, 0.0], "weight": 1.0}],
            "no_such_key": 1
        }"#;
        assert!(serde_json::from_str::<ScenarioConfig>(json).is_err());
    }
}
