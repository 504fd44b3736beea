//! Shared fixtures for the benchmark suite.

use fpam_core::stable::sample_path;
use fpam_core::{NoiseSpec, Path, PathSpec, TorusField, TorusGrid};

pub fn spec_1d() -> NoiseSpec {
    NoiseSpec::riesz(1.5, 0.3, 0.4, 1).expect("valid spec")
}

pub fn spec_2d() -> NoiseSpec {
    NoiseSpec::riesz(1.5, 0.2, 0.6, 2).expect("valid spec")
}

pub fn paths(spec: &NoiseSpec, n_steps: usize, count: u64) -> Vec<Path> {
    (0..count)
        .map(|seed| {
            sample_path(&PathSpec {
                dim: spec.dim,
                alpha: spec.alpha,
                horizon: 1.0,
                n_steps,
                seed,
            })
            .expect("valid path spec")
        })
        .collect()
}

/// Smooth periodic bump on the unit torus.
pub fn bump(n: usize, dim: usize) -> TorusField {
    let grid = TorusGrid::new(1.0, n, dim).expect("valid grid");
    TorusField::from_fn(grid, |x| {
        x.iter()
            .map(|v| ((2.0 * std::f64::consts::PI * v).cos() - 1.0).exp())
            .product()
    })
    .expect("finite field")
}
