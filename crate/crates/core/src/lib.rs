//! Decay-character toolkit for partially dissipative hyperbolic systems.
//!
//! Systems in normal form are validated and stability-tested ([`system`]), evolved exactly per
//! Fourier mode ([`propagate`]) or, for damped Euler, with a pseudo-spectral exponential
//! integrator ([`euler`]). [`spectral`] provides Littlewood–Paley blocks and Besov norms and
//! [`analyze`] turns norm time series into rate verdicts.

pub mod analyze;
pub mod config;
pub mod euler;
pub mod experiments;
pub mod linalg;
pub mod propagate;
pub mod spectral;
pub mod system;
