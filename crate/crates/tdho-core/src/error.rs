//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// Ermakov amplitude fell to (or below) the positivity floor.
    #[error("ermakov amplitude collapsed at t = {t}: alpha = {alpha} <= floor {floor}")]
    AmplitudeCollapse { t: f64, alpha: f64, floor: f64 },

    /// The adaptive integrator could not satisfy its local error target.
    #[error("integration step failure at t = {t}: {detail}")]
    StepFailure { t: f64, detail: String },

    /// A time query outside the span covered by a trajectory.
    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// The Ermakov phase difference is too close to a multiple of pi for the
    /// quadratic-action kernel prefactor to be evaluated.
    #[error("propagator caustic: phase difference {delta_phi} within {epsilon} of a multiple of pi")]
    Caustic { delta_phi: f64, epsilon: f64 },

    /// Density below the configured floor; velocity field and quantum
    /// potential are undefined there.
    #[error("singular region at ({x}, {y}), t = {t}: density {rho} below floor {floor}")]
    SingularRegion { x: f64, y: f64, t: f64, rho: f64, floor: f64 },

    /// Postselection has effectively no overlap with the preselected state,
    /// while a windowed numerator remains finite; the weak value would be
    /// dominated by the tiny denominator.
    #[error("incompatible postselection at t = {t}: |<chi|psi>| = {overlap} below threshold {threshold}")]
    IncompatiblePostselection { t: f64, overlap: f64, threshold: f64 },

    /// Invalid input parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
