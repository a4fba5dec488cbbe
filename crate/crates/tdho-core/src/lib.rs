//! Trajectory pictures of the two-dimensional time-dependent harmonic
//! oscillator: classical guiding trajectories from the Ermakov system,
//! closed-form Gaussian wavepacket dynamics with the exact quadratic-action
//! propagator, Bohmian streamlines of the probability flow, and trajectories
//! inferred from weak measurements of position and momentum.
//!
//! The core is generic over the floating-point scalar through [`Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod complex_gaussian;
pub mod ermakov;
pub mod error;
pub mod flow;
pub mod observables;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod real;
pub mod vec2;
pub mod wavepacket;
pub mod weak;

pub use error::{CoreError, Result};
pub use real::{Real, C};
pub use vec2::{Axis, Vec2};

/// Concrete `f64` aliases for the main domain types.
pub type OscillatorParams64 = params::OscillatorParams<f64>;
pub type AxisPotential64 = params::AxisPotential<f64>;
pub type ErmakovInit64 = ermakov::ErmakovInit<f64>;
pub type ErmakovState64 = ermakov::ErmakovState<f64>;
pub type GuidingTrajectory64 = ermakov::GuidingTrajectory<f64>;
pub type Superposition64 = wavepacket::Superposition<f64>;
pub type ComplexField64 = wavepacket::ComplexField<f64>;
pub type BohmianTrajectory64 = flow::BohmianTrajectory<f64>;
pub type Ensemble64 = flow::Ensemble<f64>;
pub type Wma64 = weak::Wma<f64>;
pub type WeakValueRecord64 = weak::WeakValueRecord<f64>;
pub type WeakTrajectory64 = weak::WeakTrajectory<f64>;
pub type PostselectionState64 = weak::PostselectionState<f64>;
pub type RecurrenceSpectrum64 = observables::RecurrenceSpectrum<f64>;
pub type Vec2f = Vec2<f64>;
