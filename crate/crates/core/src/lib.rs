//! A double chain of atoms interacting through Lennard-Jones forces and
//! elastic bending develops ripples when the two chains are incommensurate.
//! This crate models that system as a generalized Frenkel-Kontorova chain:
//! the lower chain is integrated out into an effective, curvature-dependent
//! site potential, and the upper chain's atom abscissas become the degrees
//! of freedom of a one-dimensional variational problem.
//!
//! The pieces fit together as follows:
//!
//! * [`potential`] builds the effective two-variable potential
//!   `vper(s, kappa)` and tabulates it with splines so that energies and
//!   the derivatives needed everywhere else are cheap.
//! * [`fkmodel`] defines supercell states for rational approximants `p/q`
//!   and the per-site energy `v(s_j, s_{j+1})` with its derivatives.
//! * [`relax`] finds minimum-energy states by quasi-Newton descent.
//! * [`hull`] extracts hull functions from relaxed states and runs
//!   convergence studies against a high-order reference approximant.
//! * [`twistmap`] exposes the equilibrium condition as an area-preserving
//!   monotone twist map and follows its orbits.
//! * [`geometry`] rebuilds the two-dimensional rippled geometry from the
//!   abscissas and measures disregistry and ripple wavelengths.
//! * [`atomistic`] is an independent two-chain molecular statics model used
//!   to validate the reduced description.

pub mod atomistic;
pub mod error;
pub mod fkmodel;
pub mod geometry;
pub mod hull;
pub mod minimize;
pub mod potential;
pub mod relax;
pub mod spline;
pub mod twistmap;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Library version, as recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
