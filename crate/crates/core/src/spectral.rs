//! Fourier analysis on the torus `T_M^d = ℝ^d / M ℤ^d`.
//!
//! Coefficients follow `f̂(k) = ∫ f(x) e^(-2πi k·x/M) dx`, approximated on an
//! `N^d` grid as `(M/N)^d · DFT`. The fractional Laplacian acts on `e^(2πi k·x/M)`
//! with multiplier `c · M^(-α) |k|^α`, where `c = (2π)^α` for the process with
//! characteristic exponent `|λ|^α` and `c = 1` for the literal lattice form.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{freq_index, signed_freq, unflatten, FftNd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    /// Period `M`.
    pub period: f64,
    /// Points per axis (even).
    pub n: usize,
    pub dim: usize,
}

impl TorusGrid {
    pub fn new(period: f64, n: usize, dim: usize) -> Result<Self> {
        let g = Self { period, n, dim };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::invalid(format!("period {} must be positive", self.period)));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid size {} must be even and ≥ 2", self.n)));
        }
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::invalid(format!("torus dimension {} not in 1..=3", self.dim)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of grid point `idx`.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut m = [0usize; 3];
        unflatten(idx, self.n, self.dim, &mut m[..self.dim]);
        for a in 0..self.dim {
            out[a] = m[a] as f64 * self.spacing();
        }
    }

    /// Signed frequency vector of DFT slot `idx`.
    pub fn frequency(&self, idx: usize, out: &mut [i64]) {
        let mut m = [0usize; 3];
        unflatten(idx, self.n, self.dim, &mut m[..self.dim]);
        for a in 0..self.dim {
            out[a] = signed_freq(m[a], self.n);
        }
    }

    /// `|k|` for every DFT slot.
    pub fn frequency_norms(&self) -> Vec<f64> {
        let mut k = [0i64; 3];
        (0..self.len())
            .map(|i| {
                self.frequency(i, &mut k[..self.dim]);
                k[..self.dim].iter().map(|v| (*v * *v) as f64).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// DFT slot of a signed frequency vector, if every component is representable.
    pub fn slot(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for kc in k {
            idx = idx * self.n + freq_index(*kc, self.n)?;
        }
        Some(idx)
    }

    pub fn fft(&self) -> FftNd {
        FftNd::new(self.n, self.dim)
    }
}

/// Grid samples of a real function with their Fourier coefficients.
#[derive(Debug, Clone)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl TorusField {
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        let mut coeffs: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        grid.fft().forward(&mut coeffs);
        let vol = grid.cell_volume();
        for c in coeffs.iter_mut() {
            *c *= vol;
        }
        Ok(Self { grid, values, coeffs })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        grid.validate()?;
        let mut x = [0.0; 3];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x[..grid.dim]);
                f(&x[..grid.dim])
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `f̂(k)`, zero when `k` is outside the representable band.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.grid.slot(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::from_values(self.grid, self.values.iter().map(|v| v + c).collect())
    }

    /// Periodic multilinear interpolation at an arbitrary point.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let h = g.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..g.dim {
            let u = x[a].rem_euclid(g.period) / h;
            let i = u.floor();
            frac[a] = u - i;
            base[a] = (i as usize) % n;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..g.dim {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx = idx * n + (base[a] + bit) % n;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Multiplier convention for the fractional Laplacian on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormConvention {
    /// `(2π)^α`, matching the simulated process.
    #[default]
    Process,
    /// `1`, the bare lattice form `|k|^α / M^(d+α)`.
    Literal,
}

impl FormConvention {
    pub fn factor(self, alpha: f64) -> f64 {
        match self {
            FormConvention::Process => (2.0 * PI).powf(alpha),
            FormConvention::Literal => 1.0,
        }
    }
}

/// `c · M^(-(d+α)) Σ_k |k|^α |f̂(k)|²`.
pub fn dirichlet_form_torus(f: &TorusField, alpha: f64, conv: FormConvention) -> f64 {
    let g = f.grid();
    let norms = g.frequency_norms();
    let sum: f64 = norms
        .iter()
        .zip(f.coeffs())
        .map(|(k, c)| if *k == 0.0 { 0.0 } else { k.powf(alpha) * c.norm_sqr() })
        .sum();
    conv.factor(alpha) * g.period.powf(-(g.dim as f64 + alpha)) * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenSolver {
    /// Dense for lattices up to 2000 modes, Lanczos beyond.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub solver: EigenSolver,
    pub tol: f64,
    pub max_iter: usize,
    pub convention: FormConvention,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            solver: EigenSolver::Auto,
            tol: 1e-8,
            max_iter: 500,
            convention: FormConvention::Process,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub lambda: f64,
    pub lattice_size: usize,
    pub iterations: usize,
    pub residual: f64,
}

const DENSE_LIMIT: usize = 2000;

/// The truncated Schrödinger operator `f - c(-Δ)^(α/2)` in the Fourier basis.
struct LatticeOperator {
    modes: Vec<Vec<i64>>,
    diag: Vec<f64>,
    potential: Box<dyn Fn(usize, usize) -> Complex64 + Sync>,
}

impl LatticeOperator {
    fn new(f: &TorusField, alpha: f64, k_trunc: usize, conv: FormConvention) -> Result<Self> {
        let g = *f.grid();
        if k_trunc > g.n / 2 {
            return Err(Error::invalid(format!(
                "K_trunc = {k_trunc} exceeds N/2 = {}",
                g.n / 2
            )));
        }
        let side = 2 * k_trunc + 1;
        let size = side.pow(g.dim as u32);
        let k = k_trunc as i64;
        let mut modes = Vec::with_capacity(size);
        let mut idx = vec![0usize; g.dim];
        for flat in 0..size {
            unflatten(flat, side, g.dim, &mut idx);
            modes.push(idx.iter().map(|i| *i as i64 - k).collect::<Vec<_>>());
        }
        let c = conv.factor(alpha) * g.period.powf(-alpha);
        let diag = modes
            .iter()
            .map(|m| {
                let norm = m.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    -c * norm.powf(alpha)
                }
            })
            .collect();
        let inv_vol = g.period.powi(-(g.dim as i32));
        let half = (g.n / 2) as i64;
        let coeffs = f.coeffs().to_vec();
        let modes_c = modes.clone();
        let potential = Box::new(move |i: usize, j: usize| {
            let mut slot = 0usize;
            for (a, b) in modes_c[i].iter().zip(&modes_c[j]) {
                let d = a - b;
                // the Nyquist mode has no conjugate partner; drop it symmetrically
                if d.abs() >= half {
                    return Complex64::new(0.0, 0.0);
                }
                let pos = if d >= 0 { d } else { d + 2 * half };
                slot = slot * (2 * half) as usize + pos as usize;
            }
            coeffs[slot] * inv_vol
        });
        Ok(Self { modes, diag, potential })
    }

    fn size(&self) -> usize {
        self.modes.len()
    }

    fn entry(&self, i: usize, j: usize) -> Complex64 {
        let v = (self.potential)(i, j);
        if i == j {
            v + self.diag[i]
        } else {
            v
        }
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += self.entry(i, j) * xj;
            }
            *yi = acc;
        });
    }

    fn dense(&self) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    fn zero_mode(&self) -> usize {
        self.modes.iter().position(|m| m.iter().all(|v| *v == 0)).unwrap_or(0)
    }
}

/// Principal eigenvalue of `f - c(-Δ)^(α/2)` on the lattice `|k|_∞ ≤ K_trunc`.
pub fn lambda_m(f: &TorusField, alpha: f64, k_trunc: usize, opts: &EigenOptions) -> Result<EigenSolution> {
    let op = LatticeOperator::new(f, alpha, k_trunc, opts.convention)?;
    let dense = match opts.solver {
        EigenSolver::Dense => true,
        EigenSolver::Lanczos => false,
        EigenSolver::Auto => op.size() <= DENSE_LIMIT,
    };
    if dense {
        let eig = SymmetricEigen::new(op.dense());
        let lambda = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(EigenSolution {
            lambda,
            lattice_size: op.size(),
            iterations: 0,
            residual: 0.0,
        })
    } else {
        lanczos_top(&op, opts)
    }
}

/// Lanczos with full reorthogonalization for the largest eigenvalue.
fn lanczos_top(op: &LatticeOperator, opts: &EigenOptions) -> Result<EigenSolution> {
    let n = op.size();
    let zero = Complex64::new(0.0, 0.0);
    // mostly the constant mode, plus a small deterministic spread so no
    // eigenvector is accidentally orthogonal to the start
    let mut v0: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1e-3 * ((i as f64 * 0.7548776662).fract() - 0.5), 0.0))
        .collect();
    v0[op.zero_mode()] += Complex64::new(1.0, 0.0);
    normalize(&mut v0);

    let max_iter = opts.max_iter.min(n);
    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![zero; n];
    let mut last = (f64::NAN, f64::INFINITY);
    for it in 0..max_iter {
        op.apply(&basis[it], &mut w);
        let a = dot(&basis[it], &w).re;
        alphas.push(a);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let beta = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let residual = (beta * eig.eigenvectors[(m - 1, top)]).abs();
        last = (theta, residual);
        if residual <= opts.tol * theta.abs().max(1.0) || beta < 1e-14 || m == n {
            return Ok(EigenSolution {
                lambda: theta,
                lattice_size: n,
                iterations: m,
                residual,
            });
        }
        betas.push(beta);
        basis.push(w.iter().map(|c| c / beta).collect());
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: last.1,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c /= n;
    }
}

/// `∫₀¹ λ_M(f(s, ·)) ds` by the trapezoid rule over uniform slices `s_i = i/(n-1)`.
pub fn lambda_time_integral(slices: &[TorusField], alpha: f64, k_trunc: usize, opts: &EigenOptions) -> Result<f64> {
    match slices.len() {
        0 => Err(Error::invalid("need at least one slice")),
        1 => Ok(lambda_m(&slices[0], alpha, k_trunc, opts)?.lambda),
        n => {
            let lambdas = slices
                .par_iter()
                .map(|f| lambda_m(f, alpha, k_trunc, opts).map(|s| s.lambda))
                .collect::<Result<Vec<_>>>()?;
            let h = 1.0 / (n - 1) as f64;
            let inner: f64 = lambdas[1..n - 1].iter().sum();
            Ok(h * (0.5 * (lambdas[0] + lambdas[n - 1]) + inner))
        }
    }
}

/// Both sides of `∫ |f(x + My) - f(x)|² dx = (2/M^d) Σ_k (1 - cos 2πk·y) |f̂(k)|²`.
///
/// Returns `(spectral side, grid side)`. Grid-aligned shifts roll the samples;
/// other shifts are applied as a spectral phase.
pub fn parseval_check(f: &TorusField, y: &[f64]) -> Result<(f64, f64)> {
    let g = *f.grid();
    if y.len() != g.dim {
        return Err(Error::invalid("shift dimension does not match the grid"));
    }
    let mut k = [0i64; 3];
    let mut spectral = 0.0;
    for (i, c) in f.coeffs().iter().enumerate() {
        g.frequency(i, &mut k[..g.dim]);
        let phase: f64 = k[..g.dim].iter().zip(y).map(|(a, b)| *a as f64 * b).sum();
        spectral += (1.0 - (2.0 * PI * phase).cos()) * c.norm_sqr();
    }
    spectral *= 2.0 * g.period.powi(-(g.dim as i32));

    let steps: Vec<f64> = y.iter().map(|v| v * g.n as f64).collect();
    let aligned = steps.iter().all(|s| (s - s.round()).abs() < 1e-12);
    let shifted: Vec<f64> = if aligned {
        let sh: Vec<usize> = steps
            .iter()
            .map(|s| (s.round() as i64).rem_euclid(g.n as i64) as usize)
            .collect();
        let mut idx = vec![0usize; g.dim];
        (0..g.len())
            .map(|i| {
                unflatten(i, g.n, g.dim, &mut idx);
                let src = idx
                    .iter()
                    .zip(&sh)
                    .fold(0, |acc, (a, s)| acc * g.n + (a + s) % g.n);
                f.values()[src]
            })
            .collect()
    } else {
        let mut c: Vec<Complex64> = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                g.frequency(i, &mut k[..g.dim]);
                let phase: f64 = k[..g.dim].iter().zip(y).map(|(a, b)| *a as f64 * b).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .collect();
        g.fft().inverse_unnormalized(&mut c);
        let scale = 1.0 / (g.len() as f64 * g.cell_volume());
        c.iter().map(|v| v.re * scale).collect()
    };
    let grid_side = g.cell_volume()
        * shifted
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    Ok((spectral, grid_side))
}
