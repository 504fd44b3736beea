//! Numerics for the fractional parabolic Anderson model.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: covariance kernels, their half-kernel decompositions and spectral measures
//! - [`stable`]: exact-in-law symmetric α-stable paths on ℝ^d and the torus
//! - [`functionals`]: the singular space-time Hamiltonian along sampled paths
//! - [`montecarlo`]: exponential moments, Lyapunov fits, lower bounds, Feynman-Kac limits
//! - [`spectral`]: Fourier analysis on the torus and the principal eigenvalue
//! - [`variational`]: the variational constant and the scaling laws built on it
//! - [`reporting`]: configs, run directories, manifests and plot data

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fft;
pub mod functionals;
pub mod kernels;
pub mod montecarlo;
pub mod quad;
pub mod reporting;
pub mod rng;
pub mod spectral;
pub mod stable;
pub mod stats;
pub mod variational;

pub use error::{Error, Result};
pub use functionals::{DiagonalPolicy, HamiltonianValue, QuadratureRule};
pub use kernels::{KernelConstants, NoiseSpec, Regime, SpatialKernel, SpectralMeasure};
pub use montecarlo::{EstimateRecord, ExperimentConfig};
pub use spectral::{TorusField, TorusGrid};
pub use stable::{Path, PathSpec, TorusPath};
pub use variational::{SpaceTimeField, VariationalResult};
