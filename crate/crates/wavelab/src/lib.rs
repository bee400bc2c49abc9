//! Spectral laboratory for the defocusing semilinear wave equation
//! `∂_t² u - Δu + |u|^{p-1} u = 0` on the torus `[0, 2π)^d`.
//!
//! The crate provides the pieces needed to experiment with randomized rough
//! initial data: plane-wave fields with dealiased nonlinear operations,
//! Littlewood-Paley blocks and Besov/Sobolev norms, unit-variance coefficient
//! randomization with per-mode deterministic streams, exact free-wave
//! propagators, a frequency-truncated symplectic solver, and a battery of
//! Monte Carlo checks for the concentration and product inequalities the
//! construction relies on.

pub mod cli;
pub mod corpus;
pub mod error;
mod fft;
pub mod field;
pub mod galerkin;
pub mod grid;
pub mod inequality;
pub mod io;
pub mod lp;
pub mod multiplier;
pub mod propagator;
pub mod randomization;
pub mod tails;
pub mod yudovich;

pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::{Mode, TorusGrid};
pub use multiplier::MultiplierSymbol;
