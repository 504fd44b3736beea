//! The singular space-time Hamiltonian
//!
//! ```text
//! H_ij = ∫₀ᵗ∫₀ᵗ |r - s|^(-β0) γ(X^i_r - X^j_s) dr ds
//! ```
//!
//! evaluated along sampled paths. The time square is cut into `n_cells²`
//! cells of side `Δ`. The time kernel is integrated exactly over every cell,
//! so the only approximation is freezing the spatial argument per cell.
//!
//! For a single path (`i = j`) the frozen value is chosen so that each cell is
//! unbiased: `E γ(X_r - X_s) = |r - s|^(-β/α) E γ(X_1)`, hence a cell whose two
//! evaluation times are `mΔ` apart gets the exact weight of
//! `|r - s|^(-β0-β/α)` rescaled by `(mΔ)^(β/α)`. Diagonal cells use the
//! increment over one cell. The estimator is unbiased for `E H` at any
//! resolution and obeys the self-similar scaling law exactly in law.
//!
//! For two independent paths started at the same point, the origin cell
//! gets the same treatment with `X^i_r - X^j_s ~ (r + s)^(1/α) X_1`, using the
//! values at the cell's upper corner. Cells whose kernel value exceeds
//! [`QuadratureRule::cap`] are refined once on the path grid, then capped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{sphere_area, spectral_measure, NoiseSpec, Regime, SpatialKernel, SpectralMeasure};
use crate::quad::TanhSinh;
use crate::rng;
use crate::stable::{sample_path_with, Path, PathSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DiagonalPolicy {
    /// Drop same-path cells with `|a - b| < width`; underestimates `H`.
    ExcludeBand { width: usize },
    /// Unbiased local power-law weights (see module docs).
    PowerLawCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureRule {
    /// Cells per time axis; `None` means one cell per path step.
    pub n_cells: Option<usize>,
    pub diagonal_policy: DiagonalPolicy,
    /// Tolerance for the one-off weight integrals.
    pub tolerance: f64,
    /// Kernel values above this trigger refinement, then clamping.
    pub cap: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            n_cells: None,
            diagonal_policy: DiagonalPolicy::PowerLawCorrection,
            tolerance: 1e-10,
            cap: 1e12,
        }
    }
}

impl QuadratureRule {
    pub fn with_cells(n_cells: usize) -> Self {
        Self {
            n_cells: Some(n_cells),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianValue {
    pub h: f64,
    /// `sqrt(H)`, defined for a single path.
    pub z: Option<f64>,
    /// Part of `h` contributed by the specially treated singular cells.
    pub diagonal_correction: f64,
    pub pair: (usize, usize),
}

/// `|x|^(2-b) / ((1-b)(2-b))`, the second antiderivative of `|x|^(-b)`.
fn antideriv2(x: f64, b: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(2.0 - b) / ((1.0 - b) * (2.0 - b))
    }
}

/// `∫∫` of `|r - s|^(-b)` over two unit cells `m` apart.
pub fn cell_pair_weight(m: usize, b: f64) -> f64 {
    let m = m as f64;
    antideriv2(m + 1.0, b) - 2.0 * antideriv2(m, b) + antideriv2((m - 1.0).abs(), b)
}

/// `∫₀ᵗ∫₀ᵗ |r - s|^(-b) dr ds`.
pub fn time_square_integral(t: f64, b: f64) -> f64 {
    2.0 * t.powf(2.0 - b) / ((1.0 - b) * (2.0 - b))
}

/// Precomputed cell weights for one grid. All weights are in units of `Δ^(2-β0)`.
#[derive(Debug, Clone)]
pub struct HamiltonianEvaluator {
    spec: NoiseSpec,
    rule: QuadratureRule,
    allow_divergence: bool,
    n_steps: usize,
    horizon: f64,
    n_cells: usize,
    /// path steps per cell
    q: usize,
    scale: f64,
    fine_scale: f64,
    plain: Vec<f64>,
    same_path: Option<Vec<f64>>,
    origin_cell: f64,
}

impl HamiltonianEvaluator {
    pub fn new(spec: &NoiseSpec, rule: QuadratureRule, n_steps: usize, horizon: f64) -> Result<Self> {
        spec.validate()?;
        if spec.regime() == Regime::NotSolvable {
            return Err(Error::NotIntegrable(Regime::NotSolvable));
        }
        let n_cells = rule.n_cells.unwrap_or(n_steps);
        if n_cells == 0 || !n_steps.is_multiple_of(n_cells) {
            return Err(Error::invalid(format!(
                "n_cells = {n_cells} must divide the path's n_steps = {n_steps}"
            )));
        }
        if let DiagonalPolicy::ExcludeBand { width } = rule.diagonal_policy {
            if width == 0 {
                return Err(Error::invalid("ExcludeBand width must be at least 1"));
            }
        }
        let beta0 = spec.beta0;
        let lag = spec.beta() / spec.alpha;
        let kappa = beta0 + lag;
        let delta = horizon / n_cells as f64;
        let plain: Vec<f64> = (0..n_cells).map(|m| cell_pair_weight(m, beta0)).collect();
        let same_path = (kappa < 1.0).then(|| {
            (0..n_cells)
                .map(|m| (m.max(1) as f64).powf(lag) * cell_pair_weight(m, kappa))
                .collect()
        });
        // ∫∫_[0,1]² |x-y|^(-β0) (x+y)^(-β/α) = 2/(2-κ) ∫₀¹ (1-v)^(-β0) (1+v)^(-β/α) dv
        let origin_cell = if lag == 0.0 {
            plain[0]
        } else {
            let j = TanhSinh::new(rule.tolerance).integrate_ends(
                |v, _, dv| dv.powf(-beta0) * (1.0 + v).powf(-lag),
                0.0,
                1.0,
            )?;
            2f64.powf(lag) * 2.0 / (2.0 - kappa) * j
        };
        Ok(Self {
            spec: spec.clone(),
            rule,
            allow_divergence: false,
            n_steps,
            horizon,
            n_cells,
            q: n_steps / n_cells,
            scale: delta.powf(2.0 - beta0),
            fine_scale: (horizon / n_steps as f64).powf(2.0 - beta0),
            plain,
            same_path,
            origin_cell,
        })
    }

    /// Permits same-path evaluation outside the fully integrable regime.
    /// The diagonal band is then dropped; values are for diagnostics only.
    pub fn allow_divergence(mut self, allow: bool) -> Self {
        self.allow_divergence = allow;
        self
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    fn check_grid(&self, p: &Path) -> Result<()> {
        if p.n_steps() != self.n_steps || p.horizon() != self.horizon || p.dim() != self.spec.dim {
            return Err(Error::GridMismatch(format!(
                "evaluator expects {} steps over {} in d = {}, path has {} steps over {} in d = {}",
                self.n_steps,
                self.horizon,
                self.spec.dim,
                p.n_steps(),
                p.horizon(),
                p.dim()
            )));
        }
        Ok(())
    }

    fn eval_index(&self, cell: usize) -> usize {
        cell * self.q + self.q / 2
    }

    fn gamma_diff(&self, x: &[f64], y: &[f64], buf: &mut [f64]) -> f64 {
        for k in 0..buf.len() {
            buf[k] = x[k] - y[k];
        }
        self.spec.gamma_eval(buf)
    }

    /// `H` of a path with itself.
    pub fn self_pair(&self, p: &Path) -> Result<HamiltonianValue> {
        self.check_grid(p)?;
        let mut buf = vec![0.0; self.spec.dim];
        let cap = self.rule.cap;
        let (band, weights) = match (self.rule.diagonal_policy, &self.same_path) {
            (DiagonalPolicy::PowerLawCorrection, Some(w)) => (0, w),
            (DiagonalPolicy::ExcludeBand { width }, _) => (width, &self.plain),
            (DiagonalPolicy::PowerLawCorrection, None) => {
                if !self.allow_divergence {
                    return Err(Error::DivergentDiagonal(self.spec.regime()));
                }
                (1, &self.plain)
            }
        };
        let mut diag = 0.0;
        if band == 0 {
            for a in 0..self.n_cells {
                let g = self.gamma_diff(p.position((a + 1) * self.q), p.position(a * self.q), &mut buf);
                diag += weights[0] * g.min(cap);
            }
        }
        let mut off = 0.0;
        for a in 0..self.n_cells {
            let xa = p.position(self.eval_index(a));
            for b in (a + band.max(1))..self.n_cells {
                let g = self.gamma_diff(p.position(self.eval_index(b)), xa, &mut buf);
                off += weights[b - a] * g.min(cap);
            }
        }
        let h = self.scale * (diag + 2.0 * off);
        Ok(HamiltonianValue {
            h,
            z: Some(h.sqrt()),
            diagonal_correction: self.scale * diag,
            pair: (0, 0),
        })
    }

    /// `H` of two distinct paths. Symmetric in its arguments bit for bit.
    pub fn cross_pair(&self, p: &Path, q: &Path) -> Result<HamiltonianValue> {
        self.check_grid(p)?;
        self.check_grid(q)?;
        let (p, q) = match canonical_cmp(p, q) {
            std::cmp::Ordering::Greater => (q, p),
            _ => (p, q),
        };
        let mut buf = vec![0.0; self.spec.dim];
        let shared_start = p.position(0) == q.position(0);
        let mut total = 0.0;
        let mut corner = 0.0;
        for a in 0..self.n_cells {
            let xa = p.position(self.eval_index(a));
            for b in 0..self.n_cells {
                if shared_start && a == 0 && b == 0 {
                    let g = self.gamma_diff(p.position(self.q), q.position(self.q), &mut buf);
                    corner = self.origin_cell * g.min(self.rule.cap);
                    continue;
                }
                let g = self.gamma_diff(xa, q.position(self.eval_index(b)), &mut buf);
                let m = a.abs_diff(b);
                if g > self.rule.cap && self.q > 1 {
                    total += self.refine(p, q, a, b, &mut buf) / self.scale;
                } else {
                    total += self.plain[m] * g.min(self.rule.cap);
                }
            }
        }
        let h = self.scale * (total + corner);
        Ok(HamiltonianValue {
            h,
            z: None,
            diagonal_correction: self.scale * corner,
            pair: (0, 1),
        })
    }

    /// One refinement level: the cell's path-grid sub-cells with exact weights.
    fn refine(&self, p: &Path, q: &Path, a: usize, b: usize, buf: &mut [f64]) -> f64 {
        let mut acc = 0.0;
        for u in a * self.q..(a + 1) * self.q {
            for v in b * self.q..(b + 1) * self.q {
                let g = self.gamma_diff(p.position(u), q.position(v), buf);
                acc += cell_pair_weight(u.abs_diff(v), self.spec.beta0) * g.min(self.rule.cap);
            }
        }
        self.fine_scale * acc
    }

    /// Entry `(i, j)` of the Hamiltonian matrix of `paths`.
    pub fn pair(&self, paths: &[Path], i: usize, j: usize) -> Result<HamiltonianValue> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let mut v = if lo == hi {
            self.self_pair(&paths[lo])?
        } else {
            self.cross_pair(&paths[lo], &paths[hi])?
        };
        v.pair = (lo, hi);
        Ok(v)
    }
}

fn canonical_cmp(p: &Path, q: &Path) -> std::cmp::Ordering {
    for (a, b) in p.positions().iter().zip(q.positions()) {
        match a.total_cmp(b) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Convenience wrapper building a one-off evaluator for the pair `(i, j)`.
pub fn hamiltonian(paths: &[Path], i: usize, j: usize, spec: &NoiseSpec, rule: QuadratureRule) -> Result<HamiltonianValue> {
    let first = paths
        .get(i.min(j))
        .ok_or_else(|| Error::invalid(format!("path index {} out of range", i.max(j))))?;
    if i.max(j) >= paths.len() {
        return Err(Error::invalid(format!("path index {} out of range", i.max(j))));
    }
    if !paths[i].same_grid(&paths[j]) {
        return Err(Error::GridMismatch(format!(
            "paths {i} and {j} have different grids ({} vs {} steps)",
            paths[i].n_steps(),
            paths[j].n_steps()
        )));
    }
    HamiltonianEvaluator::new(spec, rule, first.n_steps(), first.horizon())?.pair(paths, i, j)
}

/// `½ Σ_jk H_jk - (ρ/2) Σ_j H_jj`, with the diagonal skipped entirely at `ρ = 1`.
pub fn n_moment_exponent(paths: &[Path], eval: &HamiltonianEvaluator, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho = {rho} not in [0, 1]")));
    }
    if rho < 1.0 && eval.spec().regime() != Regime::Full {
        return Err(Error::DivergentDiagonal(eval.spec().regime()));
    }
    let mut total = 0.0;
    for j in 0..paths.len() {
        for k in j + 1..paths.len() {
            total += eval.cross_pair(&paths[j], &paths[k])?.h;
        }
    }
    if rho < 1.0 {
        let mut diag = 0.0;
        for p in paths {
            diag += eval.self_pair(p)?.h;
        }
        total += 0.5 * (1.0 - rho) * diag;
    }
    Ok(total)
}

/// `E γ(X_1)` for the unit-time stable variable, by integrating the
/// transform `exp(-(2π|ξ|)^α)` against the spectral measure of `γ`.
pub fn expected_gamma_x1(spec: &NoiseSpec) -> Result<f64> {
    spec.validate()?;
    let q = TanhSinh::new(1e-13);
    let (betas, spectral_dim): (Vec<f64>, usize) = match &spec.kernel {
        SpatialKernel::Riesz { beta } => (vec![*beta], spec.dim),
        SpatialKernel::Product { betas } => {
            let nz: Vec<f64> = betas.iter().copied().filter(|b| *b > 0.0).collect();
            let n = nz.len();
            (nz, n)
        }
    };
    let beta: f64 = betas.iter().sum();
    if beta == 0.0 {
        return Ok(1.0);
    }
    let alpha = spec.alpha;
    let radial = q.integrate_to_inf(
        |r| {
            let e = (-(2.0 * std::f64::consts::PI * r).powf(alpha)).exp();
            if e == 0.0 {
                0.0
            } else {
                r.powf(beta - 1.0) * e
            }
        },
        0.0,
    )?;
    let angular_mass = match &spec.kernel {
        SpatialKernel::Riesz { .. } => {
            let SpectralMeasure::Density { constant, .. } = spectral_measure(&q, beta, spectral_dim)? else {
                unreachable!("β > 0 gives a density");
            };
            constant * sphere_area(spectral_dim - 1)
        }
        SpatialKernel::Product { .. } => {
            // ∫_sphere ∏|ω_j|^(β_j - 1) dσ = 2 ∏Γ(β_j/2) / Γ(β/2)
            let mut c = 2.0 / gamma(0.5 * beta);
            for b in &betas {
                let SpectralMeasure::Density { constant, .. } = spectral_measure(&q, *b, 1)? else {
                    unreachable!("β_j > 0 gives a density");
                };
                c *= constant * gamma(0.5 * b);
            }
            c
        }
    };
    Ok(angular_mass * radial)
}

/// `E H` for a single path over `[0, t]`; finite only in the full regime.
pub fn expected_h(spec: &NoiseSpec, t: f64) -> Result<f64> {
    if spec.regime() != Regime::Full {
        return Err(Error::NotIntegrable(spec.regime()));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let kappa = spec.beta0 + spec.beta() / spec.alpha;
    Ok(expected_gamma_x1(spec)? * time_square_integral(t, kappa))
}

/// Exponent of the self-similar scaling `H_(at) =ᵈ a^e H_t`.
pub fn scaling_exponent(spec: &NoiseSpec) -> f64 {
    2.0 - spec.beta() / spec.alpha - spec.beta0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingWitness {
    pub exponent: f64,
    /// Samples of `H_(a t)`.
    pub scaled_horizon: Vec<f64>,
    /// Independent samples of `a^e H_t`.
    pub rescaled: Vec<f64>,
}

/// Two independent samples whose laws coincide under the scaling law.
pub fn scaling_witness(
    spec: &NoiseSpec,
    t: f64,
    a: f64,
    n_samples: usize,
    n_steps: usize,
    rule: QuadratureRule,
    seed: u64,
) -> Result<ScalingWitness> {
    if !(a > 0.0) {
        return Err(Error::invalid("scale factor must be positive"));
    }
    let exponent = scaling_exponent(spec);
    let draw = |horizon: f64, tag: u64| -> Result<Vec<f64>> {
        let eval = HamiltonianEvaluator::new(spec, rule, n_steps, horizon)?;
        let ps = PathSpec {
            dim: spec.dim,
            alpha: spec.alpha,
            horizon,
            n_steps,
            seed,
        };
        (0..n_samples as u64)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, &[tag, r]);
                let path = sample_path_with(&ps, &mut g)?;
                Ok(eval.self_pair(&path)?.h)
            })
            .collect()
    };
    let scaled_horizon = draw(a * t, 0)?;
    let factor = a.powf(exponent);
    let rescaled = draw(t, 1)?.into_iter().map(|h| factor * h).collect();
    Ok(ScalingWitness {
        exponent,
        scaled_horizon,
        rescaled,
    })
}
