//! Super-resolution of nonnegative spike trains on the unit sphere from
//! spherical-harmonic coefficients up to a cutoff degree.
//!
//! The pipeline: build an equiangular [`SphereGrid`], draw a Rayleigh-regular
//! [`DiracSignal`], measure it with [`forward`], add noise with
//! [`add_noise`], back-project with the adjoint, and recover with
//! [`solve`]. [`experiments`] wraps the pipeline into seeded sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod io;
pub mod operators;
pub mod signal;
pub mod solver;
pub mod sphere;

pub use error::{Error, Result};
pub use harmonics::{Complex64, HarmonicIndex};
pub use operators::{adjoint, forward, GriddedFunction, HarmonicCoeffs, MeasurementMatrix};
pub use signal::{add_noise, gen_signal, gen_support, DiracSignal, Measurement};
pub use solver::{solve, SolveConfig, SolveMode, SolveResult, SolveStatus};
pub use sphere::{build_grid, SphereGrid, SpherePoint};
