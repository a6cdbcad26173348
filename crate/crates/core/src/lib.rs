//! Geometric scattering on compact manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`manifold`] builds discretised manifolds (circle, flat torus, sphere,
//!   triangle meshes) together with a truncated Laplace–Beltrami eigenbasis,
//!   quadrature weights and a geodesic metric.
//! * [`spectral`] holds spectral functions, their integral operators and
//!   kernel-level quantities.
//! * [`filters`] validates low/high-pass filters, computes Littlewood–Paley
//!   frame bounds and builds the multiplicity-normalised wavelet bank.
//! * [`scattering`] implements the propagator and the scattering transform.
//! * [`deformation`] covers diffeomorphism actions, deformation sizes,
//!   commutator norms and the experiment drivers.
//! * [`report`] writes CSV tables with JSON manifests.

pub mod deformation;
pub mod error;
pub mod filters;
pub mod linalg;
pub mod manifold;
pub mod mesh;
pub mod report;
pub mod scattering;
pub mod signals;
pub mod spectral;

pub use error::{Error, Result};
pub use manifold::{ManifoldId, ManifoldKind, Point, Signal, SpectralManifold, UniqueSpectrum};
pub use num_complex::Complex64;
