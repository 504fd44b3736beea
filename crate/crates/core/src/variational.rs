//! The space-time variational problem behind the Lyapunov coefficient.
//!
//! For slice-normalized `g(s, x)` the functional is
//!
//! ```text
//! ½ ∫∫ |r-s|^(-β0) ∫∫ θγ(x-y) g²(s,x) g²(r,y) dx dy dr ds − ∫ ∫ |ξ|^α |ĝ(s,ξ)|² dξ ds
//! ```
//!
//! with `ĝ(ξ) = ∫ g(x) e^(-2πi ξ·x) dx`. Space is a periodic box standing in for
//! ℝ^d: the interaction uses the spectral measure of `γ` sampled at `ξ = k/M`
//! (the Fourier series of the periodized kernel) and time is split into `n_t`
//! slices coupled by exact cell integrals of `|r-s|^(-β0)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ui};

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::functionals::cell_pair_weight;
use crate::kernels::{compute_constants, NoiseSpec, Regime, SpatialSpectrum, SpectralMeasure};
use crate::rng::stream;
use crate::spectral::TorusGrid;

const NORM_TOL: f64 = 1e-10;

/// A space-time field sampled at `n_t` time slices on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: TorusGrid,
    n_t: usize,
    /// Slice-major: slice `i` occupies `values[i*len .. (i+1)*len]`.
    values: Vec<f64>,
}

impl SpaceTimeField {
    /// Wraps values that must already be slice-normalized.
    pub fn new(grid: TorusGrid, n_t: usize, values: Vec<f64>) -> Result<Self> {
        let f = Self::unchecked(grid, n_t, values)?;
        f.check_normalized()?;
        Ok(f)
    }

    /// Rescales every slice to unit `L²` norm.
    pub fn normalized(grid: TorusGrid, n_t: usize, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::unchecked(grid, n_t, values)?;
        f.renormalize()?;
        Ok(f)
    }

    /// The constant field `M^(-d/2)`.
    pub fn constant(grid: TorusGrid, n_t: usize) -> Result<Self> {
        let v = grid.period.powf(-(grid.dim as f64) / 2.0);
        Self::new(grid, n_t, vec![v; n_t * grid.len()])
    }

    fn unchecked(grid: TorusGrid, n_t: usize, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if n_t == 0 {
            return Err(Error::invalid("need at least one time slice"));
        }
        if values.len() != n_t * grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values, expected {} slices of {}",
                values.len(),
                n_t,
                grid.len()
            )));
        }
        Ok(Self { grid, n_t, values })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// `∫ g²(s_i, x) dx` for every slice.
    pub fn slice_norms(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        (0..self.n_t)
            .map(|i| vol * self.slice(i).iter().map(|v| v * v).sum::<f64>())
            .collect()
    }

    pub fn check_normalized(&self) -> Result<()> {
        for (slice, norm) in self.slice_norms().into_iter().enumerate() {
            if !((norm - 1.0).abs() <= NORM_TOL) {
                return Err(Error::NotNormalized { slice, norm });
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) -> Result<()> {
        let n = self.grid.len();
        for (i, norm) in self.slice_norms().into_iter().enumerate() {
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::NotNormalized { slice: i, norm });
            }
            let s = norm.sqrt().recip();
            self.values[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= s);
        }
        Ok(())
    }

    /// Largest `L²` distance between consecutive slices.
    pub fn max_slice_variation(&self) -> f64 {
        let vol = self.grid.cell_volume();
        (1..self.n_t)
            .map(|i| {
                let d: f64 = self
                    .slice(i)
                    .iter()
                    .zip(self.slice(i - 1))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (vol * d).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Shifts every slice by a whole number of grid cells along each axis.
    pub fn translated(&self, cells: &[usize]) -> Self {
        let g = self.grid;
        let n = g.n;
        let len = g.len();
        let mut idx = vec![0usize; g.dim];
        let mut out = vec![0.0; self.values.len()];
        for s in 0..self.n_t {
            for j in 0..len {
                crate::fft::unflatten(j, n, g.dim, &mut idx);
                let dst = idx.iter().zip(cells).fold(0, |acc, (a, c)| acc * n + (a + c) % n);
                out[s * len + dst] = self.values[s * len + j];
            }
        }
        Self { grid: g, n_t: self.n_t, values: out }
    }

    /// CSV with columns `s,x1..xd,g`, slices at their midpoints.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        let cols: Vec<String> = (1..=g.dim).map(|a| format!("x{a}")).collect();
        writeln!(out, "s,{},g", cols.join(","))?;
        let mut x = vec![0.0; g.dim];
        for i in 0..self.n_t {
            let s = (i as f64 + 0.5) / self.n_t as f64;
            for (j, v) in self.slice(i).iter().enumerate() {
                g.point(j, &mut x);
                let xs: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
                writeln!(out, "{s},{},{v:e}", xs.join(","))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationalOptions {
    /// Multiplier `θ` of the spatial covariance.
    pub theta: f64,
    /// Initial line-search step.
    pub step: f64,
    pub max_iter: usize,
    /// Relative change of the value over 10 iterations that counts as converged.
    pub tol: f64,
    /// Riemannian gradient norm that counts as converged.
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Values above this are reported as divergence.
    pub ceiling: f64,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        Self {
            theta: 1.0,
            step: 1e-2,
            max_iter: 20_000,
            tol: 1e-8,
            grad_tol: 1e-10,
            restarts: 4,
            seed: 0,
            ceiling: 1e8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalResult {
    pub m_estimate: f64,
    pub interaction: f64,
    pub energy: f64,
    #[serde(skip)]
    pub field: SpaceTimeField,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    /// Final value of every restart, in restart order.
    pub restart_values: Vec<f64>,
    pub grid: TorusGrid,
    pub n_t: usize,
    pub theta: f64,
}

/// Value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalParts {
    pub interaction: f64,
    pub energy: f64,
}

impl FunctionalParts {
    pub fn value(&self) -> f64 {
        self.interaction - self.energy
    }
}

/// Precomputed weights for one noise, grid and slice count.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    grid: TorusGrid,
    n_t: usize,
    fft: FftNd,
    /// Spectral weight of the interaction per DFT slot, `θ` included.
    interaction_weight: Vec<f64>,
    /// `|k/M|^α M^(-d)` per DFT slot.
    energy_weight: Vec<f64>,
    /// `1 / (1 + |k/M|^α)`.
    precond: Vec<f64>,
    /// Time coupling `∫∫` over slice pairs.
    coupling: Vec<f64>,
}

/// Epstein zeta `Σ'_{n ∈ ℤ^d} |n|^(-s)` continued to `0 < s < d`, by theta-function splitting.
pub fn epstein_zeta(s: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let reach = 5i64;
    let side = (2 * reach + 1) as usize;
    let mut idx = vec![0usize; dim];
    let mut sum = 0.0;
    for flat in 0..side.pow(dim as u32) {
        crate::fft::unflatten(flat, side, dim, &mut idx);
        let n2: i64 = idx.iter().map(|i| (*i as i64 - reach).pow(2)).sum();
        if n2 == 0 {
            continue;
        }
        let q = PI * n2 as f64;
        sum += gamma_ui(s / 2.0, q) * q.powf(-s / 2.0) + gamma_ui((d - s) / 2.0, q) * q.powf(-(d - s) / 2.0);
    }
    (sum - 2.0 / s - 2.0 / (d - s)) * PI.powf(s / 2.0) / gamma(s / 2.0)
}

/// Fourier weight of the periodized kernel at integer frequency `|k|`.
///
/// The zero mode of `Σ_n |x + nM|^(-β)` diverges; it is fixed by analytic
/// continuation, which makes the periodic kernel agree with `|x|^(-β)` up to
/// `O(|x|²)` near the origin.
fn factor_weight(mu: &SpectralMeasure, k: f64, period: f64) -> f64 {
    match *mu {
        SpectralMeasure::Dirac => {
            if k == 0.0 {
                1.0
            } else {
                0.0
            }
        }
        SpectralMeasure::Density { beta, dim, .. } => {
            if k == 0.0 {
                -epstein_zeta(beta, dim) * period.powf(-beta)
            } else {
                mu.density(k / period) * period.powi(-(dim as i32))
            }
        }
    }
}

impl VariationalProblem {
    pub fn new(spec: &NoiseSpec, grid: TorusGrid, n_t: usize, theta: f64) -> Result<Self> {
        spec.validate()?;
        grid.validate()?;
        if grid.dim != spec.dim {
            return Err(Error::invalid(format!(
                "grid dimension {} differs from noise dimension {}",
                grid.dim, spec.dim
            )));
        }
        if n_t == 0 {
            return Err(Error::invalid("need at least one time slice"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("theta = {theta} must be positive")));
        }
        let constants = compute_constants(spec, 1e-10)?;
        let m = grid.period;
        let d = grid.dim;
        let mut k = [0i64; 3];
        let len = grid.len();
        let mut interaction_weight = Vec::with_capacity(len);
        let mut energy_weight = Vec::with_capacity(len);
        let mut precond = Vec::with_capacity(len);
        for slot in 0..len {
            grid.frequency(slot, &mut k[..d]);
            let norm = k[..d].iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
            let w = match &constants.mu {
                SpatialSpectrum::Riesz(mu) => factor_weight(mu, norm, m),
                SpatialSpectrum::Product(factors) => {
                    let mut acc = 1.0;
                    for (mu, kc) in factors.iter().zip(&k[..d]) {
                        acc *= factor_weight(mu, kc.abs() as f64, m);
                    }
                    acc
                }
            };
            interaction_weight.push(theta * w);
            let xi_a = (norm / m).powf(spec.alpha);
            energy_weight.push(xi_a * m.powi(-(d as i32)));
            precond.push(1.0 / (1.0 + xi_a));
        }
        let ds = 1.0 / n_t as f64;
        let scale = ds.powf(2.0 - spec.beta0);
        let coupling = (0..n_t * n_t)
            .map(|ij| scale * cell_pair_weight((ij / n_t).abs_diff(ij % n_t), spec.beta0))
            .collect();
        Ok(Self {
            grid,
            n_t,
            fft: grid.fft(),
            interaction_weight,
            energy_weight,
            precond,
            coupling,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    fn transform(&self, v: impl Iterator<Item = f64>) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = v.map(|x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut c);
        let vol = self.grid.cell_volume();
        c.iter_mut().for_each(|z| *z *= vol);
        c
    }

    fn check_shape(&self, g: &SpaceTimeField) -> Result<()> {
        if g.grid != self.grid || g.n_t != self.n_t {
            return Err(Error::invalid("field grid does not match the problem"));
        }
        Ok(())
    }

    /// Interaction and energy terms for a normalized field.
    pub fn parts(&self, g: &SpaceTimeField) -> Result<FunctionalParts> {
        self.check_shape(g)?;
        g.check_normalized()?;
        Ok(self.parts_raw(&g.values))
    }

    pub fn functional_eval(&self, g: &SpaceTimeField) -> Result<f64> {
        Ok(self.parts(g)?.value())
    }

    fn parts_raw(&self, values: &[f64]) -> FunctionalParts {
        let len = self.grid.len();
        let (sq, lin): (Vec<_>, Vec<_>) = (0..self.n_t)
            .map(|i| {
                let s = &values[i * len..(i + 1) * len];
                (self.transform(s.iter().map(|v| v * v)), self.transform(s.iter().copied()))
            })
            .unzip();
        let mut interaction = 0.0;
        for i in 0..self.n_t {
            for j in 0..self.n_t {
                let b: f64 = sq[i]
                    .iter()
                    .zip(&sq[j])
                    .zip(&self.interaction_weight)
                    .map(|((a, b), w)| w * (a * b.conj()).re)
                    .sum();
                interaction += self.coupling[i * self.n_t + j] * b;
            }
        }
        let ds = 1.0 / self.n_t as f64;
        let energy: f64 = lin
            .iter()
            .map(|c| c.iter().zip(&self.energy_weight).map(|(z, w)| w * z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * ds;
        FunctionalParts {
            interaction: 0.5 * interaction,
            energy,
        }
    }

    /// Euclidean gradient with respect to the grid values.
    pub fn gradient(&self, g: &SpaceTimeField) -> Result<Vec<f64>> {
        self.check_shape(g)?;
        Ok(self.gradient_raw(&g.values))
    }

    fn gradient_raw(&self, values: &[f64]) -> Vec<f64> {
        let len = self.grid.len();
        let vol = self.grid.cell_volume();
        let ds = 1.0 / self.n_t as f64;
        let sq: Vec<Vec<Complex64>> = (0..self.n_t)
            .map(|i| self.transform(values[i * len..(i + 1) * len].iter().map(|v| v * v)))
            .collect();
        let mut out = vec![0.0; values.len()];
        for i in 0..self.n_t {
            let slice = &values[i * len..(i + 1) * len];
            // Φ_i = Σ_j T_ij · (m · û_j)^∨
            let mut phi = vec![Complex64::new(0.0, 0.0); len];
            for (j, u_j) in sq.iter().enumerate() {
                let t = self.coupling[i * self.n_t + j];
                for ((p, u), w) in phi.iter_mut().zip(u_j).zip(&self.interaction_weight) {
                    *p += t * w * u;
                }
            }
            self.fft.inverse_unnormalized(&mut phi);
            let mut e = self.transform(slice.iter().copied());
            e.iter_mut().zip(&self.energy_weight).for_each(|(z, w)| *z *= *w);
            self.fft.inverse_unnormalized(&mut e);
            for (x, o) in out[i * len..(i + 1) * len].iter_mut().enumerate() {
                *o = 2.0 * vol * (slice[x] * phi[x].re - ds * e[x].re);
            }
        }
        out
    }

    /// `L²` norm of the gradient projected onto the tangent space of the slice spheres.
    fn riemannian_norm(&self, values: &[f64], grad: &[f64]) -> f64 {
        let len = self.grid.len();
        let vol = self.grid.cell_volume();
        let mut total = 0.0;
        for i in 0..self.n_t {
            let g = &values[i * len..(i + 1) * len];
            let gr = &grad[i * len..(i + 1) * len];
            // L² gradient is the Euclidean one divided by the cell volume
            let c: f64 = g.iter().zip(gr).map(|(a, b)| a * b).sum();
            total += gr
                .iter()
                .zip(g)
                .map(|(b, a)| {
                    let r = b / vol - c * a;
                    r * r
                })
                .sum::<f64>()
                * vol;
        }
        total.sqrt()
    }

    /// Preconditioned tangent ascent direction and its slope `⟨grad, dir⟩`.
    fn direction(&self, values: &[f64], grad: &[f64]) -> (Vec<f64>, f64) {
        let len = self.grid.len();
        let vol = self.grid.cell_volume();
        let scale = self.n_t as f64 / vol;
        let mut dir = vec![0.0; values.len()];
        let mut slope = 0.0;
        for i in 0..self.n_t {
            let g = &values[i * len..(i + 1) * len];
            let gr = &grad[i * len..(i + 1) * len];
            let pg = self.precondition(g.iter().copied());
            let pgr = self.precondition(gr.iter().map(|v| v * scale));
            let c = dot(g, &pgr) / dot(g, &pg);
            for (x, d) in dir[i * len..(i + 1) * len].iter_mut().enumerate() {
                *d = pgr[x] - c * pg[x];
            }
            slope += dot(gr, &dir[i * len..(i + 1) * len]);
        }
        (dir, slope)
    }

    fn precondition(&self, v: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut c: Vec<Complex64> = v.map(|x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut c);
        c.iter_mut().zip(&self.precond).for_each(|(z, p)| *z *= *p);
        self.fft.inverse_unnormalized(&mut c);
        let inv = 1.0 / self.grid.len() as f64;
        c.iter().map(|z| z.re * inv).collect()
    }

    /// A normalized random start: a Gaussian bump with slice-dependent noise.
    pub fn random_start(&self, seed: u64, restart: u64) -> Result<SpaceTimeField> {
        let mut rng = stream(seed, &[restart]);
        let g = self.grid;
        let centre: Vec<f64> = (0..g.dim).map(|_| rng.random::<f64>() * g.period).collect();
        let width = g.period * rng.random_range(0.05..0.2);
        let mut x = vec![0.0; g.dim];
        let mut values = Vec::with_capacity(self.n_t * g.len());
        for _ in 0..self.n_t {
            for j in 0..g.len() {
                g.point(j, &mut x);
                let r2: f64 = x
                    .iter()
                    .zip(&centre)
                    .map(|(a, c)| {
                        let d = (a - c).rem_euclid(g.period);
                        let d = d.min(g.period - d);
                        d * d
                    })
                    .sum();
                let z: f64 = rng.sample(StandardNormal);
                values.push((-r2 / (2.0 * width * width)).exp() * (1.0 + 0.05 * z) + 1e-3);
            }
        }
        SpaceTimeField::normalized(g, self.n_t, values)
    }

    /// Projected ascent from `start` with Armijo backtracking.
    pub fn ascend(&self, start: SpaceTimeField, opts: &VariationalOptions) -> Result<VariationalResult> {
        self.check_shape(&start)?;
        let mut field = start;
        field.renormalize()?;
        let mut value = self.parts_raw(&field.values).value();
        let mut history = vec![value];
        let mut step = opts.step;
        let mut converged = false;
        let mut iterations = 0;
        let mut grad = self.gradient_raw(&field.values);
        let mut grad_norm = self.riemannian_norm(&field.values, &grad);
        while iterations < opts.max_iter {
            if grad_norm <= opts.grad_tol {
                converged = true;
                break;
            }
            let (dir, slope) = self.direction(&field.values, &grad);
            if !(slope > 0.0) {
                converged = true;
                break;
            }
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = field.values.iter().zip(&dir).map(|(g, d)| g + step * d).collect();
                let mut cand = SpaceTimeField { values: trial, ..field.clone() };
                if cand.renormalize().is_ok() {
                    let v = self.parts_raw(&cand.values).value();
                    if v >= value + 1e-4 * step * slope {
                        accepted = Some((cand, v));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((next, v)) = accepted else {
                // no ascent possible at machine precision
                converged = true;
                break;
            };
            if !v.is_finite() || v > opts.ceiling {
                return Err(Error::Diverged {
                    value: v,
                    ceiling: opts.ceiling,
                });
            }
            field = next;
            value = v;
            step *= 2.0;
            iterations += 1;
            history.push(value);
            grad = self.gradient_raw(&field.values);
            grad_norm = self.riemannian_norm(&field.values, &grad);
            if history.len() > 10 {
                let old = history[history.len() - 11];
                if (value - old).abs() <= opts.tol * value.abs().max(1e-300) {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            log::warn!("variational ascent stopped at max_iter = {} (gradient norm {grad_norm:e})", opts.max_iter);
        }
        let parts = self.parts_raw(&field.values);
        Ok(VariationalResult {
            m_estimate: parts.value(),
            interaction: parts.interaction,
            energy: parts.energy,
            field,
            iterations,
            final_gradient_norm: grad_norm,
            converged,
            restart_values: vec![parts.value()],
            grid: self.grid,
            n_t: self.n_t,
            theta: opts.theta,
        })
    }

    /// Best of `opts.restarts` ascents from random starts.
    pub fn maximize(&self, opts: &VariationalOptions) -> Result<VariationalResult> {
        let runs = (0..opts.restarts.max(1) as u64)
            .into_par_iter()
            .map(|r| self.ascend(self.random_start(opts.seed, r)?, opts))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = runs.iter().map(|r| r.m_estimate).collect();
        let mut best = runs
            .into_iter()
            .reduce(|a, b| if b.m_estimate > a.m_estimate { b } else { a })
            .expect("at least one restart");
        best.restart_values = values;
        Ok(best)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn require_full(spec: &NoiseSpec) -> Result<()> {
    match spec.regime() {
        Regime::Full => Ok(()),
        r => Err(Error::invalid(format!(
            "the variational constant is finite only when alpha*beta0 + beta < alpha (regime {r:?})"
        ))),
    }
}

/// Value of the functional at a normalized field with `θ = 1`.
pub fn functional_eval(g: &SpaceTimeField, spec: &NoiseSpec) -> Result<f64> {
    VariationalProblem::new(spec, *g.grid(), g.n_t(), 1.0)?.functional_eval(g)
}

/// Maximizes the functional over slice-normalized fields on `grid` with `n_t` slices.
pub fn maximize_m(spec: &NoiseSpec, grid: TorusGrid, n_t: usize, opts: &VariationalOptions) -> Result<VariationalResult> {
    require_full(spec)?;
    VariationalProblem::new(spec, grid, n_t, opts.theta)?.maximize(opts)
}

/// The time-free problem: a single slice carrying the full time coupling.
pub fn stationary_m(spec: &NoiseSpec, grid: TorusGrid, opts: &VariationalOptions) -> Result<VariationalResult> {
    maximize_m(spec, grid, 1, opts)
}

/// `M` on boxes of increasing size at fixed resolution `points_per_unit`.
pub fn box_sweep(
    spec: &NoiseSpec,
    boxes: &[f64],
    points_per_unit: f64,
    n_t: usize,
    opts: &VariationalOptions,
) -> Result<Vec<(f64, VariationalResult)>> {
    boxes
        .iter()
        .map(|b| {
            let mut n = (b * points_per_unit).round() as usize;
            n += n % 2;
            let grid = TorusGrid::new(*b, n.max(2), spec.dim)?;
            Ok((*b, maximize_m(spec, grid, n_t, opts)?))
        })
        .collect()
}

/// Critical exponential-integrability constant `(β/(α-β)) ((α-β)/(2α))^(α/β) M^((β-α)/β)`.
pub fn critical_constant(spec: &NoiseSpec, m_value: f64) -> Result<f64> {
    let (a, b) = (spec.alpha, spec.beta());
    if !(m_value > 0.0) {
        return Err(Error::invalid("M must be positive"));
    }
    if !(b > 0.0 && b < a) {
        return Err(Error::invalid(format!("need 0 < beta < alpha, got beta = {b}")));
    }
    Ok(b / (a - b) * ((a - b) / (2.0 * a)).powf(a / b) * m_value.powf((b - a) / b))
}

/// Predicted limit of `t^(-χ) log ‖u(t,x)‖_p`: `(p-ρ)^(α/(α-β)) M`.
pub fn lyapunov_prediction(spec: &NoiseSpec, p: f64, rho: f64, m_value: f64) -> Result<f64> {
    let (a, b) = (spec.alpha, spec.beta());
    if !(p >= 1.0) || !(0.0..=1.0).contains(&rho) || (p == 1.0 && rho == 1.0) {
        return Err(Error::invalid(format!("need p ≥ 1, rho in [0,1], (p,rho) ≠ (1,1); got ({p}, {rho})")));
    }
    if !(b < a) {
        return Err(Error::invalid("need beta < alpha"));
    }
    Ok((p - rho).powf(a / (a - b)) * m_value)
}
