//! Equilibrium measures for anisotropic Coulomb-type interaction energies
//! with quadratic confinement.
//!
//! The minimiser of the energy is the normalised uniform measure on a
//! spheroid. This crate computes its shape, its potentials, and a set of
//! independent checks: Monte Carlo and quadrature convolutions, a particle
//! gradient flow and a Fourier-side energy identity.

// Range checks are written `!(x > lo)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energetics;
pub mod equilibrium;
pub mod error;
pub mod kernel;
pub mod particles;
pub mod potentials;
pub mod quadrature;
pub mod roots;
pub mod special_functions;

pub use error::{Error, Result};
pub use kernel::EnergyParams;
