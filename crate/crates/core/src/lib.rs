//! FENE dumbbells advected and stretched by a synthetic turbulent flow.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral_noise`]: Fourier-shell velocity modes, stretching
//!   gradients and the Itô–Stratonovich corrector matrix,
//! * [`weights`]: the radial weight family and coil–stretch diagnostics,
//! * [`fene_sde`]: Brownian dynamics of the dumbbell ensemble,
//! * [`fokker_planck`]: finite-volume solver of the limit Fokker–Planck
//!   equation in the elongation variable,
//! * [`experiments`]: config-driven convergence experiments and reports.

pub mod error;
pub mod experiments;
pub mod fene_sde;
pub mod fokker_planck;
pub mod quad;
pub mod rng;
pub mod spectral_noise;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
