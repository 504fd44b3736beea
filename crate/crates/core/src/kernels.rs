//! Space-time covariance kernels of the driving noise.
//!
//! The noise has covariance `|r - s|^(-β0) γ(x - y)` where `γ` is either the
//! Riesz kernel `|x|^(-β)` or the product kernel `∏ |x_j|^(-β_j)`. This module
//! evaluates those kernels, their square-root ("half") kernels and smooth
//! truncations, the power-law spectral measures, and the solvability regime.
//!
//! Kernels are total functions: at a singular point they return
//! `f64::INFINITY` instead of failing. Quadrature layers never sample there.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::TanhSinh;

/// Spatial covariance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpatialKernel {
    /// `γ(x) = |x|^(-β)`, `β ∈ [0, d)`.
    Riesz { beta: f64 },
    /// `γ(x) = ∏ |x_j|^(-β_j)`, each `β_j ∈ [0, 1)`.
    Product { betas: Vec<f64> },
}

/// Full parameterisation of the noise and the driving stable process.
///
/// Serialises as `{alpha, beta0, kernel: {type, beta | betas}, dim}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub beta0: f64,
    pub kernel: SpatialKernel,
    pub dim: usize,
}

/// Which solution theory the parameters admit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `β ≥ α`: no solution theory.
    #[serde(rename = "none")]
    NotSolvable,
    /// `β < α ≤ αβ0 + β`: only the Skorohod (ρ = 1) moments are finite.
    SkorohodOnly,
    /// `αβ0 + β < α`: every ρ ∈ [0, 1] is admissible.
    Full,
}

impl NoiseSpec {
    pub fn riesz(alpha: f64, beta0: f64, beta: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            alpha,
            beta0,
            kernel: SpatialKernel::Riesz { beta },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn product(alpha: f64, beta0: f64, betas: Vec<f64>) -> Result<Self> {
        let spec = Self {
            alpha,
            beta0,
            dim: betas.len(),
            kernel: SpatialKernel::Product { betas },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!("alpha = {} not in (0, 2]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.beta0) {
            return Err(Error::invalid(format!("beta0 = {} not in [0, 1)", self.beta0)));
        }
        match &self.kernel {
            SpatialKernel::Riesz { beta } => {
                if !(*beta >= 0.0 && *beta < self.dim as f64) {
                    return Err(Error::invalid(format!(
                        "riesz beta = {beta} not in [0, {})",
                        self.dim
                    )));
                }
            }
            SpatialKernel::Product { betas } => {
                if betas.len() != self.dim {
                    return Err(Error::invalid(format!(
                        "product kernel has {} exponents for dim {}",
                        betas.len(),
                        self.dim
                    )));
                }
                if let Some(b) = betas.iter().find(|b| !(0.0..1.0).contains(*b)) {
                    return Err(Error::invalid(format!("product beta_j = {b} not in [0, 1)")));
                }
            }
        }
        Ok(())
    }

    /// Effective spatial scaling exponent: `β`, or `Σ β_j` for the product kernel.
    pub fn beta(&self) -> f64 {
        match &self.kernel {
            SpatialKernel::Riesz { beta } => *beta,
            SpatialKernel::Product { betas } => betas.iter().sum(),
        }
    }

    pub fn regime(&self) -> Regime {
        dalang_check(self)
    }

    /// `γ(x)`; `+∞` at the singular set.
    pub fn gamma_eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kernel {
            SpatialKernel::Riesz { beta } => {
                if *beta == 0.0 {
                    return 1.0;
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    f64::INFINITY
                } else {
                    r2.powf(-0.5 * beta)
                }
            }
            SpatialKernel::Product { betas } => {
                let mut acc = 1.0;
                for (xj, bj) in x.iter().zip(betas) {
                    if *bj == 0.0 {
                        continue;
                    }
                    if *xj == 0.0 {
                        return f64::INFINITY;
                    }
                    acc *= xj.abs().powf(-bj);
                }
                acc
            }
        }
    }

    /// Temporal covariance `|u|^(-β0)`, identically 1 when `β0 = 0`.
    pub fn temporal_eval(&self, u: f64) -> f64 {
        power_or_flat(u.abs(), -self.beta0)
    }

    /// Temporal half kernel `|u|^(-(1+β0)/2)`.
    pub fn temporal_half_eval(&self, u: f64) -> f64 {
        power_or_flat(u.abs(), -0.5 * (1.0 + self.beta0))
    }

    /// Spatial half kernel `K`: `|x|^(-(d+β)/2)` or `∏ |x_j|^(-(1+β_j)/2)`.
    pub fn k_eval(&self, x: &[f64]) -> f64 {
        match &self.kernel {
            SpatialKernel::Riesz { beta } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                power_or_flat(r, -0.5 * (self.dim as f64 + beta))
            }
            SpatialKernel::Product { betas } => x
                .iter()
                .zip(betas)
                .map(|(xj, bj)| power_or_flat(xj.abs(), -0.5 * (1.0 + bj)))
                .product(),
        }
    }

    /// Smoothly truncated temporal half kernel `k_{A,a}`.
    pub fn truncated_time_kernel(&self, cut: Truncation, u: f64) -> f64 {
        let r = u.abs();
        let window = cut.window(r);
        if window == 0.0 {
            0.0
        } else {
            window * self.temporal_half_eval(r)
        }
    }

    /// Smoothly truncated spatial half kernel `K_{B,b}`.
    pub fn truncated_space_kernel(&self, cut: Truncation, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let window = cut.window(r);
        if window == 0.0 {
            0.0
        } else {
            window * self.k_eval(x)
        }
    }
}

fn power_or_flat(r: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else if r == 0.0 {
        f64::INFINITY
    } else {
        r.powf(exponent)
    }
}

/// Solvability regime of the model.
pub fn dalang_check(spec: &NoiseSpec) -> Regime {
    let (alpha, beta0, beta) = (spec.alpha, spec.beta0, spec.beta());
    if beta >= alpha {
        Regime::NotSolvable
    } else if alpha * beta0 + beta < alpha {
        Regime::Full
    } else {
        Regime::SkorohodOnly
    }
}

/// C^∞ cutoff: 1 on `[0, 1]`, `exp(1 - 1/(1 - (u-1)²))` on `(1, 2)`, 0 beyond.
pub fn bump(u: f64) -> f64 {
    if u <= 1.0 {
        1.0
    } else if u >= 2.0 {
        0.0
    } else {
        let v = u - 1.0;
        (1.0 - 1.0 / (1.0 - v * v)).exp()
    }
}

/// Outer/inner radii of a smooth annular cutoff `ϱ(r/outer)(1 - ϱ(r/inner))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    outer: f64,
    inner: f64,
}

impl Truncation {
    pub fn new(outer: f64, inner: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::invalid(format!(
                "truncation needs 0 < inner < outer, got inner = {inner}, outer = {outer}"
            )));
        }
        Ok(Self { outer, inner })
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    fn window(&self, r: f64) -> f64 {
        bump(r / self.outer) * (1.0 - bump(r / self.inner))
    }
}

/// A power-law spectral measure on ℝ^n: either `C |ξ|^(β - n) dξ` or, for
/// a flat (`β = 0`) covariance, the point mass at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpectralMeasure {
    Dirac,
    Density { constant: f64, beta: f64, dim: usize },
}

impl SpectralMeasure {
    /// Density value at a nonzero frequency; zero for the Dirac measure.
    pub fn density(&self, xi_norm: f64) -> f64 {
        match *self {
            SpectralMeasure::Dirac => 0.0,
            SpectralMeasure::Density { constant, beta, dim } => {
                constant * xi_norm.powf(beta - dim as f64)
            }
        }
    }

    /// Mass of the cube `[-h, h]^n` (finite because `β > 0`).
    pub fn zero_cell_mass(&self, h: f64) -> Result<f64> {
        match *self {
            SpectralMeasure::Dirac => Ok(1.0),
            SpectralMeasure::Density { constant, beta, dim } => {
                Ok(constant * h.powf(beta) * unit_cube_power_mass(beta, dim)?)
            }
        }
    }
}

/// Spectral measure of `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpatialSpectrum {
    Riesz(SpectralMeasure),
    /// One factor per coordinate.
    Product(Vec<SpectralMeasure>),
}

/// Constants of the half-kernel decompositions and spectral measures.
///
/// `None` for a decomposition constant means the flat (`β0 = 0` or `β_j = 0`)
/// branch: the half-kernel overlap integral diverges and callers bypass it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `C0` with `C0 ∫ |s-u|^(-(1+β0)/2) |r-u|^(-(1+β0)/2) du = |s-r|^(-β0)`.
    pub c0: Option<f64>,
    /// `C(γ)` with `C(γ) ∫ K(y-x) K(y) dy = γ(x)`.
    pub c_gamma: Option<f64>,
    /// Fourier transform of `|s|^(-β0)`.
    pub mu0: SpectralMeasure,
    /// Fourier transform of `γ`.
    pub mu: SpatialSpectrum,
}

/// Computes every constant by quadrature to relative tolerance `quad_tol`.
pub fn compute_constants(spec: &NoiseSpec, quad_tol: f64) -> Result<KernelConstants> {
    spec.validate()?;
    if !(quad_tol > 0.0) {
        return Err(Error::invalid("quad_tol must be positive"));
    }
    let q = TanhSinh::new(quad_tol * 1e-2);

    let c0 = if spec.beta0 == 0.0 {
        None
    } else {
        Some(1.0 / half_overlap_1d(&q, spec.beta0, 0.0, 1.0)?)
    };
    let mu0 = spectral_measure(&q, spec.beta0, 1)?;

    let (c_gamma, mu) = match &spec.kernel {
        SpatialKernel::Riesz { beta } => {
            let c = if *beta == 0.0 {
                None
            } else {
                Some(1.0 / riesz_half_overlap(&q, *beta, spec.dim, 1.0)?)
            };
            (c, SpatialSpectrum::Riesz(spectral_measure(&q, *beta, spec.dim)?))
        }
        SpatialKernel::Product { betas } => {
            let c = if betas.contains(&0.0) {
                None
            } else {
                let mut acc = 1.0;
                for b in betas {
                    acc /= half_overlap_1d(&q, *b, 0.0, 1.0)?;
                }
                Some(acc)
            };
            let factors = betas
                .iter()
                .map(|b| spectral_measure(&q, *b, 1))
                .collect::<Result<Vec<_>>>()?;
            (c, SpatialSpectrum::Product(factors))
        }
    };

    Ok(KernelConstants {
        c0,
        c_gamma,
        mu0,
        mu,
    })
}

/// `∫_ℝ |s-u|^(-(1+b)/2) |r-u|^(-(1+b)/2) du` for `b ∈ (0, 1)`, `s ≠ r`.
pub fn half_overlap_1d(q: &TanhSinh, b: f64, s: f64, r: f64) -> Result<f64> {
    let (lo, hi) = if s < r { (s, r) } else { (r, s) };
    let gap = hi - lo;
    let p = -0.5 * (1.0 + b);
    // (-∞, lo]: distances lo-u and hi-u = gap + (lo-u)
    let left = q.integrate_to_inf_ends(|_, d| d.powf(p) * (gap + d).powf(p), 0.0)?;
    let mid = q.integrate_ends(|_, da, db| da.powf(p) * db.powf(p), lo, hi)?;
    Ok(2.0 * left + mid)
}

/// `∫_{ℝ^d} |y - x|^(-(d+β)/2) |y|^(-(d+β)/2) dy` at `|x| = rho`.
pub fn riesz_half_overlap(q: &TanhSinh, beta: f64, dim: usize, rho: f64) -> Result<f64> {
    if dim == 1 {
        return half_overlap_1d(q, beta, 0.0, rho);
    }
    let p = 0.5 * (dim as f64 + beta);
    let d = dim as f64;
    let shell = sphere_area(dim - 2);
    // |y - x|² = (r - ρ)² + 4 r ρ sin²(θ/2), with θ the angle between y and x
    let angular = |r: f64, dr: f64| -> f64 {
        if dr.abs() < 1e-100 {
            // a shell this thin contributes below double precision
            return 0.0;
        }
        let integrand = |theta: f64| {
            let dist = dr.hypot(2.0 * (r * rho).sqrt() * (0.5 * theta).sin());
            theta.sin().powi(dim as i32 - 2) * dist.powf(-p)
        };
        // near r = ρ the integrand peaks at θ = 0 with width |r - ρ|/sqrt(rρ);
        // geometric panels resolve every scale between that width and π
        let width = dr.abs() / (r * rho).sqrt();
        let mut total = 0.0;
        let mut lo = 0.0;
        let mut hi = width.min(PI);
        loop {
            match q.integrate(integrand, lo, hi) {
                Ok(v) => total += v,
                Err(e) => {
                    log::debug!("angular integral failed at r = {r}: {e}");
                    return f64::NAN;
                }
            }
            if hi >= PI {
                return total;
            }
            lo = hi;
            hi = (hi * 8.0).min(PI);
        }
    };
    let radial = |r: f64, dr: f64| r.powf(d - 1.0 - p) * angular(r, dr);
    let inner = q.integrate_ends(|r, _, db| radial(r, db), 0.0, rho)?;
    let middle = q.integrate_ends(|r, da, _| radial(r, da), rho, 2.0 * rho)?;
    let outer = q.integrate_to_inf_ends(|r, _| radial(r, r - rho), 2.0 * rho)?;
    Ok(shell * (inner + middle + outer))
}

/// Surface area of the unit sphere `S^(n)` in ℝ^(n+1); `S^0` has two points.
pub fn sphere_area(n: usize) -> f64 {
    let m = (n + 1) as f64;
    2.0 * PI.powf(0.5 * m) / gamma(0.5 * m)
}

/// Spectral measure of `|x|^(-β)` on ℝ^dim under `f̂(ξ) = ∫ e^(-2πi x·ξ) f(x) dx`.
///
/// The density constant comes from pairing both sides against the Gaussian
/// `e^(-π|x|²)`, which is its own transform: the pairing reduces to two radial
/// integrals whose ratio is the constant.
pub fn spectral_measure(q: &TanhSinh, beta: f64, dim: usize) -> Result<SpectralMeasure> {
    if beta == 0.0 {
        return Ok(SpectralMeasure::Dirac);
    }
    let d = dim as f64;
    let gauss = |r: f64, p: f64| {
        let g = (-PI * r * r).exp();
        if g == 0.0 {
            0.0
        } else {
            r.powf(p) * g
        }
    };
    let space = q.integrate_to_inf_ends(|r, _| gauss(r, d - 1.0 - beta), 0.0)?;
    let freq = q.integrate_to_inf_ends(|r, _| gauss(r, beta - 1.0), 0.0)?;
    Ok(SpectralMeasure::Density {
        constant: space / freq,
        beta,
        dim,
    })
}

/// `∫_{[-1,1]^n} |ξ|^(β - n) dξ`.
fn unit_cube_power_mass(beta: f64, dim: usize) -> Result<f64> {
    let q = TanhSinh::new(1e-12);
    match dim {
        1 => Ok(2.0 / beta),
        // polar: (1/β) ∫ R(φ)^β dφ with R = 1/max(|cos|, |sin|); 8 symmetric wedges
        2 => Ok(8.0 / beta * q.integrate(|phi| phi.cos().powf(-beta), 0.0, PI / 4.0)?),
        3 => {
            // 48 symmetric pieces of the cube; on each, R = 1/ω_z with ω_z the largest coordinate
            let piece = q.integrate(
                |phi| {
                    // region 0 ≤ φ ≤ π/4, polar angle from cos θ ≥ cos φ sin θ
                    let theta_max = (1.0 / phi.cos()).atan();
                    q.integrate(|theta| theta.sin() * theta.cos().powf(-beta), 0.0, theta_max)
                        .unwrap_or(f64::NAN)
                },
                0.0,
                PI / 4.0,
            )?;
            Ok(48.0 / beta * piece)
        }
        _ => Err(Error::invalid(format!(
            "zero-cell spectral mass implemented for dim ≤ 3, got {dim}"
        ))),
    }
}

/// One evaluated identity at a probe point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub probe: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

impl IdentityCheck {
    fn new(name: &str, probe: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        let rel_err = ((lhs - rhs) / rhs).abs();
        Self {
            name: name.to_string(),
            probe,
            lhs,
            rhs,
            rel_err,
        }
    }
}

const TIME_PROBES: [(f64, f64); 5] = [(0.0, 1.0), (0.25, 2.0), (-1.5, 0.5), (3.0, 3.1), (-4.0, 6.0)];
const SPACE_SCALES: [f64; 5] = [0.3, 0.8, 1.0, 2.5, 7.0];

/// Re-evaluates every defining identity at probe points, integrating the
/// overlap at the actual probe separation rather than by rescaling.
pub fn verify_identities(
    spec: &NoiseSpec,
    constants: &KernelConstants,
    quad_tol: f64,
) -> Result<Vec<IdentityCheck>> {
    let q = TanhSinh::new(quad_tol * 1e-2);
    let mut out = Vec::new();

    if let Some(c0) = constants.c0 {
        for (s, r) in TIME_PROBES {
            let lhs = c0 * half_overlap_1d(&q, spec.beta0, s, r)?;
            out.push(IdentityCheck::new("temporal-decomposition", vec![s, r], lhs, spec.temporal_eval(s - r)));
        }
    }

    if let Some(cg) = constants.c_gamma {
        for (i, scale) in SPACE_SCALES.iter().enumerate() {
            // probe direction rotates with i so d ≥ 2 is not only tested on an axis
            let x: Vec<f64> = (0..spec.dim)
                .map(|j| scale * (1.0 + 0.37 * ((i + 2 * j) % 5) as f64))
                .collect();
            let overlap = match &spec.kernel {
                SpatialKernel::Riesz { beta } => {
                    let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    riesz_half_overlap(&q, *beta, spec.dim, rho)?
                }
                SpatialKernel::Product { betas } => {
                    let mut acc = 1.0;
                    for (xj, bj) in x.iter().zip(betas) {
                        acc *= half_overlap_1d(&q, *bj, 0.0, *xj)?;
                    }
                    acc
                }
            };
            let rhs = spec.gamma_eval(&x);
            out.push(IdentityCheck::new("spatial-decomposition", x, cg * overlap, rhs));
        }
    }

    let mut pair = |name: &str, m: &SpectralMeasure, beta: f64, dim: usize| -> Result<()> {
        if let SpectralMeasure::Density { .. } = m {
            let (lhs, rhs) = exponential_pairing(&q, m, beta, dim)?;
            out.push(IdentityCheck::new(name, vec![beta, dim as f64], lhs, rhs));
        }
        Ok(())
    };
    pair("temporal-spectral-pair", &constants.mu0, spec.beta0, 1)?;
    match (&spec.kernel, &constants.mu) {
        (SpatialKernel::Riesz { beta }, SpatialSpectrum::Riesz(m)) => {
            pair("spatial-spectral-pair", m, *beta, spec.dim)?
        }
        (SpatialKernel::Product { betas }, SpatialSpectrum::Product(ms)) => {
            for (b, m) in betas.iter().zip(ms) {
                pair("spatial-spectral-pair", m, *b, 1)?;
            }
        }
        _ => return Err(Error::invalid("constants were computed for a different kernel family")),
    }
    Ok(out)
}

/// Both sides of `∫ |x|^(-β) φ(x) dx = ∫ φ̂(ξ) μ(dξ)` for `φ(x) = e^(-2π|x|)`,
/// whose transform is the Poisson kernel `c_n (1 + |ξ|²)^(-(n+1)/2)`.
/// Unlike the Gaussian used to fit the constant, this pair is not scale
/// invariant, so it independently tests the constant.
fn exponential_pairing(q: &TanhSinh, m: &SpectralMeasure, beta: f64, dim: usize) -> Result<(f64, f64)> {
    let SpectralMeasure::Density { constant, .. } = *m else {
        return Err(Error::invalid("pairing needs a density"));
    };
    let d = dim as f64;
    let shell = sphere_area(dim - 1);
    let space = shell * q.integrate_to_inf_ends(|r, _| r.powf(d - 1.0 - beta) * (-2.0 * PI * r).exp(), 0.0)?;
    let poisson = gamma(0.5 * (d + 1.0)) / PI.powf(0.5 * (d + 1.0));
    let freq = shell
        * constant
        * poisson
        * q.integrate_to_inf_ends(|r, _| r.powf(beta - 1.0) * (1.0 + r * r).powf(-0.5 * (d + 1.0)), 0.0)?;
    Ok((freq, space))
}
