//! Collapse-model (CSL) analysis of room-temperature phonon entanglement
//! between two macroscopic diamonds.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] holds physical constants, the experiment preset and the
//!   collapse-parameter records.
//! * [`special`] and [`quadrature`] provide the Bessel functions and the
//!   adaptive Gauss–Kronrod integrator the form-factor oracles rely on.
//! * [`formfactor`] computes the decoherence coefficient η in closed form,
//!   as a Fourier-space integral and as a real-space Monte-Carlo estimate.
//! * [`dynamics`] evolves the two-phonon density matrix under the CSL
//!   master equation, analytically and with an adaptive Runge–Kutta solver.
//! * [`photonics`] models the Stokes/anti-Stokes heralding and the fringe
//!   probabilities measured at the anti-Stokes detectors.
//! * [`exclusion`] scans the (λ, r_C) plane and extracts the bound.

pub mod dynamics;
pub mod exclusion;
pub mod formfactor;
pub mod ode;
pub mod params;
pub mod photonics;
pub mod quadrature;
pub mod special;

pub use dynamics::{DensityMatrix4, EvolutionParams};
pub use exclusion::{BoundaryCurve, ExclusionGrid, GridSpec};
pub use formfactor::{CylinderDensity, EtaMethod, EtaResult};
pub use params::{CollapseParams, MassConvention, PhononGeometry, ReferencePoint};
pub use photonics::{FringeConfig, PhotonicState, Truncation};
