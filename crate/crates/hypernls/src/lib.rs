//! Pseudospectral simulator and estimate-audit toolkit for the radial
//! defocusing cubic nonlinear Schrödinger equation on three-dimensional
//! hyperbolic space.
//!
//! Radial fields on ℍ³ are stored in the conjugated representation
//! `w(r) = sinh(r)·u(r)`, under which the hyperbolic Laplacian acts as
//! `∂_rr − 1` with Dirichlet conditions on a truncated interval `(0, R)`.
//! A discrete sine transform diagonalizes the operator exactly, so every
//! linear propagator, heat-flow frequency projection, and fractional
//! derivative is a plain spectral multiplier.
//!
//! On top of that core sit:
//!
//! - [`calculus`]: sinh-weighted norms, energy/mass functionals, and
//!   heat-flow low/high/band frequency projections;
//! - [`propagators`]: exact linear flow, Strang split-step for the cubic
//!   NLS, and the forced flow used for cross-validation;
//! - [`highlow`]: the high-low frequency decomposition engine — frequency
//!   splitting of rough data, adaptive interval partition by a scattering
//!   budget, boundary absorption, and the per-interval energy ledger;
//! - [`diagnostics`]: Strichartz tables, Morawetz / local-smoothing /
//!   Bernstein / radial-Sobolev audits, a finite-horizon scattering
//!   diagnostic, and power-law fitting;
//! - [`lab`]: experiment configuration, rough-data generation, sweeps,
//!   checkpointing, and report emission.

pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod highlow;
pub mod lab;
pub mod propagators;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{RadialField, RadialGrid, SpectralField};
