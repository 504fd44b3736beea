//! Multi-dimensional FFTs on row-major cubic grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for an `n^dim` grid.
#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `X[k] = Σ_j x[j] e^(-2πi k·j/n)`, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    /// `x[j] = Σ_k X[k] e^(+2πi k·j/n)`, in place and without the `1/n^dim`.
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len(), "grid size mismatch");
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in 0..data.len() / n {
                // enumerate the lines along `axis`
                let outer = start / stride;
                let inner = start % stride;
                let base = outer * block + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                plan.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Signed frequency of DFT index `j` on an `n`-point axis: `j` below `n/2`, else `j - n`.
pub fn signed_freq(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// DFT index of signed frequency `k`, if representable.
pub fn freq_index(k: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if k >= half || k < -half {
        None
    } else if k >= 0 {
        Some(k as usize)
    } else {
        Some((k + n as i64) as usize)
    }
}

/// Row-major multi-index of a flat index.
pub fn unflatten(mut idx: usize, n: usize, dim: usize, out: &mut [usize]) {
    for a in (0..dim).rev() {
        out[a] = idx % n;
        idx /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::needless_range_loop)]
    fn naive(data: &[Complex64], n: usize, dim: usize, sign: f64) -> Vec<Complex64> {
        let total = data.len();
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        let mut jk = vec![0; dim];
        let mut jj = vec![0; dim];
        for k in 0..total {
            unflatten(k, n, dim, &mut jk);
            for j in 0..total {
                unflatten(j, n, dim, &mut jj);
                let phase: usize = jk.iter().zip(&jj).map(|(a, b)| a * b).sum();
                let ang = sign * 2.0 * std::f64::consts::PI * phase as f64 / n as f64;
                out[k] += data[j] * Complex64::from_polar(1.0, ang);
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_in_two_and_three_dims() {
        for (n, dim) in [(4, 2), (6, 2), (4, 3)] {
            let len = n * n * if dim == 3 { n } else { 1 };
            let data: Vec<Complex64> = (0..len)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let plan = FftNd::new(n, dim);
            let mut fwd = data.clone();
            plan.forward(&mut fwd);
            let oracle = naive(&data, n, dim, -1.0);
            for (a, b) in fwd.iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-10);
            }
            plan.inverse_unnormalized(&mut fwd);
            for (a, b) in fwd.iter().zip(&data) {
                assert!((a / len as f64 - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn frequency_indexing() {
        assert_eq!(signed_freq(3, 8), 3);
        assert_eq!(signed_freq(4, 8), -4);
        assert_eq!(signed_freq(7, 8), -1);
        assert_eq!(freq_index(-1, 8), Some(7));
        assert_eq!(freq_index(4, 8), None);
        assert_eq!(freq_index(-4, 8), Some(4));
    }
}
