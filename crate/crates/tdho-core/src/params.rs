//! Oscillator parameters: mass, hbar and the per-axis quadratic potential
//! with cosine drive, V_j(t) = v_j - kappa_j * cos(2 omega_j t).

use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::vec2::Axis;

/// One axis of the time-dependent frequency-squared profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisPotential<T> {
    /// Static frequency-squared offset.
    pub v: T,
    /// Drive amplitude (frequency-squared units). Zero gives a static axis.
    pub kappa: T,
    /// Drive half-frequency; the modulation runs at 2*omega.
    pub omega: T,
}

impl<T: Real> AxisPotential<T> {
    pub fn static_axis(v: T) -> Self {
        Self { v, kappa: T::zero(), omega: T::zero() }
    }
}

/// Full model parameters of the 2D oscillator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorParams<T> {
    pub mass: T,
    pub hbar: T,
    pub x: AxisPotential<T>,
    pub y: AxisPotential<T>,
}

impl<T: Real> OscillatorParams<T> {
    pub fn new(mass: T, hbar: T, x: AxisPotential<T>, y: AxisPotential<T>) -> Result<Self> {
        let p = Self { mass, hbar, x, y };
        p.validate()?;
        Ok(p)
    }

    /// Unit mass, unit hbar, both axes static with frequency-squared `v`.
    pub fn isotropic_static(v: T) -> Result<Self> {
        Self::new(T::one(), T::one(), AxisPotential::static_axis(v), AxisPotential::static_axis(v))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > T::zero()) {
            return Err(CoreError::InvalidParameter("mass must be positive".into()));
        }
        if !(self.hbar > T::zero()) {
            return Err(CoreError::InvalidParameter("hbar must be positive".into()));
        }
        for axis in Axis::BOTH {
            let a = self.axis(axis);
            if a.kappa == T::zero() && !(a.v > T::zero()) {
                return Err(CoreError::InvalidParameter(format!(
                    "static axis {:?} needs v > 0 (got {})",
                    axis, a.v
                )));
            }
            if a.omega < T::zero() {
                return Err(CoreError::InvalidParameter("omega must be >= 0".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn axis(&self, axis: Axis) -> &AxisPotential<T> {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    /// Time-dependent frequency squared, V_j(t) = v_j - kappa_j cos(2 omega_j t).
    /// omega = 0 with kappa != 0 degenerates smoothly to the static value v - kappa.
    #[inline]
    pub fn potential(&self, axis: Axis, t: T) -> T {
        let a = self.axis(axis);
        a.v - a.kappa * (T::two() * a.omega * t).cos()
    }

    /// Potential energy (m/2)(V_x x^2 + V_y y^2) gradient factor per axis:
    /// dU/dx_j = m V_j(t) x_j.
    #[inline]
    pub fn potential_gradient_coeff(&self, axis: Axis, t: T) -> T {
        self.mass * self.potential(axis, t)
    }

    /// Ermakov phase constant c0 = 2*hbar.
    #[inline]
    pub fn c0(&self) -> T {
        T::two() * self.hbar
    }

    /// Width at the breathing-free fixed point of the static limit,
    /// alpha^4 = c0^2 / v, i.e. alpha0 = sqrt(2 hbar / sqrt(v)).
    pub fn default_alpha0(&self, axis: Axis) -> Result<T> {
        let v = self.axis(axis).v;
        if !(v > T::zero()) {
            return Err(CoreError::InvalidParameter(
                "default width needs v > 0; set alpha0 explicitly".into(),
            ));
        }
        Ok((T::two() * self.hbar / v.sqrt()).sqrt())
    }
}
