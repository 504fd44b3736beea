//! Monte Carlo estimators built on path samples.
//!
//! Every replica draws from its own stream `stream(master_seed, [replica, path])`,
//! so estimates are bit-reproducible regardless of thread count, and different
//! `θ` (or `ρ`) values reuse the same paths.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{n_moment_exponent, HamiltonianEvaluator, QuadratureRule};
use crate::kernels::{compute_constants, NoiseSpec, Regime, SpatialSpectrum, SpectralMeasure};
use crate::rng::stream;
use crate::spectral::TorusField;
use crate::stable::{sample_increment, sample_path_with, wrap, Path, PathSpec};
use crate::stats::{log_mean_exp, weighted_line_fit, LogMean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: NoiseSpec,
    /// Moment order; a positive integer for Monte Carlo.
    pub p: f64,
    pub rho: f64,
    pub t_grid: Vec<f64>,
    pub n_replicas: usize,
    pub n_steps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho = {} not in [0, 1]", self.rho)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::invalid(format!("p = {} must be ≥ 1", self.p)));
        }
        if self.n_replicas == 0 || self.n_steps == 0 {
            return Err(Error::invalid("n_replicas and n_steps must be positive"));
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("every horizon must be positive and finite"));
        }
        Ok(())
    }

    /// `p` as a path count; fractional orders are only reachable through the variational prediction.
    pub fn integer_p(&self) -> Result<usize> {
        if self.p.fract() != 0.0 || self.p < 1.0 {
            return Err(Error::invalid(format!(
                "Monte Carlo moments need an integer p, got {}",
                self.p
            )));
        }
        Ok(self.p as usize)
    }

    fn path_spec(&self, t: f64) -> PathSpec {
        PathSpec {
            dim: self.spec.dim,
            alpha: self.spec.alpha,
            horizon: t,
            n_steps: self.n_steps,
            seed: self.master_seed,
        }
    }

    fn path(&self, t: f64, replica: usize, index: usize) -> Result<Path> {
        let mut rng = stream(self.master_seed, &[replica as u64, index as u64]);
        sample_path_with(&self.path_spec(t), &mut rng)
    }
}

/// Feynman-Kac run on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    pub alpha: f64,
    /// Horizon `t`.
    pub t: f64,
    pub n_replicas: usize,
    pub n_steps: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum Estimator {
    ExpMoment { theta: f64 },
    Moment,
    LowerBound { n_terms: usize },
    FeynmanKac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RecordConfig {
    Experiment(ExperimentConfig),
    FeynmanKac(FkConfig),
}

impl RecordConfig {
    pub fn master_seed(&self) -> u64 {
        match self {
            RecordConfig::Experiment(c) => c.master_seed,
            RecordConfig::FeynmanKac(c) => c.master_seed,
        }
    }
}

/// One estimate with everything needed to reproduce it.
///
/// `log_estimate` is the log of the sample mean; `point_estimate` and `stderr`
/// are on the natural scale of the estimated quantity (for Feynman-Kac runs
/// that quantity is already `(1/t) log E[...]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    #[serde(flatten)]
    pub estimator: Estimator,
    pub config: RecordConfig,
    pub t: f64,
    pub point_estimate: f64,
    pub stderr: f64,
    pub log_estimate: f64,
    pub log_stderr: f64,
    pub effective_sample_size: f64,
    pub n_replicas: usize,
    /// Streams are `stream(master_seed, [replica, path])`.
    pub master_seed: u64,
    #[serde(skip)]
    pub wall_time: Option<Duration>,
}

impl EstimateRecord {
    fn from_log_mean(estimator: Estimator, config: RecordConfig, t: f64, lm: LogMean, n: usize, started: Instant) -> Self {
        let master_seed = config.master_seed();
        Self {
            estimator,
            config,
            t,
            point_estimate: lm.log_mean.exp(),
            stderr: lm.stderr,
            log_estimate: lm.log_mean,
            log_stderr: lm.log_stderr,
            effective_sample_size: lm.ess,
            n_replicas: n,
            master_seed,
            wall_time: Some(started.elapsed()),
        }
    }

    pub fn ess_fraction(&self) -> f64 {
        self.effective_sample_size / self.n_replicas as f64
    }
}

fn require_full(spec: &NoiseSpec) -> Result<()> {
    match spec.regime() {
        Regime::Full => Ok(()),
        r => Err(Error::DivergentDiagonal(r)),
    }
}

/// Single-path Hamiltonians `H_t` for every replica.
pub fn hamiltonian_samples(config: &ExperimentConfig, t: f64) -> Result<Vec<f64>> {
    config.validate()?;
    require_full(&config.spec)?;
    let eval = HamiltonianEvaluator::new(&config.spec, config.rule, config.n_steps, t)?;
    (0..config.n_replicas)
        .into_par_iter()
        .map(|r| Ok(eval.self_pair(&config.path(t, r, 0)?)?.h))
        .collect()
}

/// `E exp(θ H_t)`.
pub fn exp_moment(config: &ExperimentConfig, theta: f64, t: f64) -> Result<EstimateRecord> {
    Ok(exp_moment_sweep(config, &[theta], t)?.remove(0))
}

/// `E exp(θ H_t)` for several `θ` on one set of paths.
pub fn exp_moment_sweep(config: &ExperimentConfig, thetas: &[f64], t: f64) -> Result<Vec<EstimateRecord>> {
    if thetas.iter().any(|th| !(*th > 0.0 && th.is_finite())) {
        return Err(Error::invalid("theta must be positive"));
    }
    let started = Instant::now();
    let h = hamiltonian_samples(config, t)?;
    thetas
        .iter()
        .map(|th| {
            let logs: Vec<f64> = h.iter().map(|v| th * v).collect();
            Ok(EstimateRecord::from_log_mean(
                Estimator::ExpMoment { theta: *th },
                RecordConfig::Experiment(config.clone()),
                t,
                log_mean_exp(&logs)?,
                config.n_replicas,
                started,
            ))
        })
        .collect()
}

/// `E u^ρ(t, x)^n` with `u0 ≡ 1`, from replicas of `n` independent paths.
pub fn moment_u_rho(config: &ExperimentConfig, t: f64) -> Result<EstimateRecord> {
    config.validate()?;
    let n = config.integer_p()?;
    let started = Instant::now();
    let eval = HamiltonianEvaluator::new(&config.spec, config.rule, config.n_steps, t)?;
    let logs = (0..config.n_replicas)
        .into_par_iter()
        .map(|r| {
            let paths = (0..n).map(|j| config.path(t, r, j)).collect::<Result<Vec<_>>>()?;
            n_moment_exponent(&paths, &eval, config.rho)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateRecord::from_log_mean(
        Estimator::Moment,
        RecordConfig::Experiment(config.clone()),
        t,
        log_mean_exp(&logs)?,
        config.n_replicas,
        started,
    ))
}

/// Growth exponent `χ = (2α - β - αβ0)/(α - β)` of `log E|u(t,x)|^p`.
pub fn chi(spec: &NoiseSpec) -> f64 {
    let (a, b) = (spec.alpha, spec.beta());
    (2.0 * a - b - a * spec.beta0) / (a - b)
}

/// Effective horizon `t^χ (p-ρ)^(α/(α-β))`.
pub fn t_p(spec: &NoiseSpec, t: f64, p: f64, rho: f64) -> f64 {
    let (a, b) = (spec.alpha, spec.beta());
    t.powf(chi(spec)) * (p - rho).powf(a / (a - b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub t: f64,
    pub log_estimate: f64,
    pub log_stderr: f64,
    pub ess_fraction: f64,
}

impl From<&EstimateRecord> for FitPoint {
    fn from(r: &EstimateRecord) -> Self {
        Self {
            t: r.t,
            log_estimate: r.log_estimate,
            log_stderr: r.log_stderr,
            ess_fraction: r.ess_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFit {
    pub chi: f64,
    /// Slope of `log E|u|^p` against `t^χ`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `slope / p`, comparable with `(p-ρ)^(α/(α-β)) M`.
    pub normalized_slope: f64,
    pub used: usize,
    /// Horizons dropped because their effective sample size was under 1%.
    pub dropped: Vec<f64>,
}

const MIN_ESS_FRACTION: f64 = 0.01;

/// Weighted least squares of `log_estimate` on `t^χ`.
pub fn lyapunov_fit(points: &[FitPoint], spec: &NoiseSpec, p: f64, rho: f64) -> Result<LyapunovFit> {
    if !(0.0..=1.0).contains(&rho) || !(p >= 1.0) {
        return Err(Error::invalid(format!("invalid (p, rho) = ({p}, {rho})")));
    }
    if spec.beta() >= spec.alpha {
        return Err(Error::invalid("growth exponent needs beta < alpha"));
    }
    let (kept, low): (Vec<&FitPoint>, Vec<&FitPoint>) =
        points.iter().partition(|pt| pt.ess_fraction >= MIN_ESS_FRACTION);
    let dropped: Vec<f64> = low.iter().map(|pt| pt.t).collect();
    if !dropped.is_empty() {
        log::warn!("dropping horizons {dropped:?}: effective sample size below 1% of replicas");
    }
    if kept.len() < 3 {
        return Err(Error::IllConditioned(format!("{} usable horizons, need at least 3", kept.len())));
    }
    let t_min = kept.iter().map(|pt| pt.t).fold(f64::INFINITY, f64::min);
    let t_max = kept.iter().map(|pt| pt.t).fold(0.0, f64::max);
    if t_max < 2.0 * t_min {
        return Err(Error::IllConditioned(format!("horizons span only [{t_min}, {t_max}]")));
    }
    let c = chi(spec);
    let x: Vec<f64> = kept.iter().map(|pt| pt.t.powf(c)).collect();
    let y: Vec<f64> = kept.iter().map(|pt| pt.log_estimate).collect();
    let w: Vec<f64> = if kept.iter().all(|pt| pt.log_stderr > 0.0) {
        kept.iter().map(|pt| pt.log_stderr.powi(-2)).collect()
    } else {
        vec![1.0; kept.len()]
    };
    let fit = weighted_line_fit(&x, &y, &w)?;
    Ok(LyapunovFit {
        chi: c,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        normalized_slope: fit.slope / p,
        used: kept.len(),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeEntry {
    /// Time-frequency index: `τ = tau · dtau`.
    pub tau: i64,
    /// Space-frequency index: `ξ = xi · dxi`.
    pub xi: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

impl LatticeEntry {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A test function `h(τ, ξ)` supported on a finite frequency lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFunction {
    pub dtau: f64,
    pub dxi: f64,
    pub entries: Vec<LatticeEntry>,
}

impl LatticeFunction {
    /// Largest `|h(-τ,-ξ) - conj h(τ,ξ)|`; missing partners count as zero.
    pub fn hermitian_defect(&self) -> f64 {
        let lookup = |tau: i64, xi: &[i64]| -> Complex64 {
            self.entries
                .iter()
                .filter(|e| e.tau == tau && e.xi == xi)
                .map(|e| e.value())
                .sum()
        };
        self.entries
            .iter()
            .map(|e| {
                let neg: Vec<i64> = e.xi.iter().map(|v| -v).collect();
                (lookup(-e.tau, &neg) - e.value().conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.dtau > 0.0 && self.dxi > 0.0) {
            return Err(Error::invalid("lattice spacings must be positive"));
        }
        if let Some(e) = self.entries.iter().find(|e| e.xi.len() != dim) {
            return Err(Error::invalid(format!(
                "entry has {} space indices, noise has dimension {dim}",
                e.xi.len()
            )));
        }
        let defect = self.hermitian_defect();
        if defect > 1e-12 {
            return Err(Error::AsymmetricInput(defect));
        }
        Ok(())
    }
}

/// `μ`-mass of the lattice cell of half-width `h/2` around index `k`.
fn cell_mass(mu: &SpectralMeasure, k: &[i64], h: f64) -> Result<f64> {
    let zero = k.iter().all(|v| *v == 0);
    match mu {
        SpectralMeasure::Dirac => Ok(if zero { 1.0 } else { 0.0 }),
        SpectralMeasure::Density { .. } => {
            if zero {
                mu.zero_cell_mass(0.5 * h)
            } else {
                let norm = k.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
                Ok(mu.density(norm * h) * h.powi(k.len() as i32))
            }
        }
    }
}

/// Test function with the `μ0 ⊗ μ` cell weights folded in.
struct WeightedTerms {
    tau: Vec<f64>,
    xi: Vec<Vec<f64>>,
    coeff: Vec<Complex64>,
    norm_sq: f64,
}

impl WeightedTerms {
    fn new(h: &LatticeFunction, spec: &NoiseSpec) -> Result<Self> {
        h.validate(spec.dim)?;
        let constants = compute_constants(spec, 1e-10)?;
        let mut out = Self {
            tau: Vec::new(),
            xi: Vec::new(),
            coeff: Vec::new(),
            norm_sq: 0.0,
        };
        for e in &h.entries {
            let w0 = cell_mass(&constants.mu0, &[e.tau], h.dtau)?;
            let w = match &constants.mu {
                SpatialSpectrum::Riesz(mu) => cell_mass(mu, &e.xi, h.dxi)?,
                SpatialSpectrum::Product(fs) => {
                    let mut acc = 1.0;
                    for (mu, k) in fs.iter().zip(&e.xi) {
                        acc *= cell_mass(mu, &[*k], h.dxi)?;
                    }
                    acc
                }
            };
            let weight = w0 * w;
            if weight == 0.0 || e.value() == Complex64::new(0.0, 0.0) {
                continue;
            }
            out.norm_sq += weight * e.value().norm_sqr();
            out.tau.push(e.tau as f64 * h.dtau);
            out.xi.push(e.xi.iter().map(|v| *v as f64 * h.dxi).collect());
            out.coeff.push(weight * e.value());
        }
        Ok(out)
    }

    /// `(F̃h)(s, x) = Re Σ w h e^(-2πi(τs + ξ·x))`.
    fn eval(&self, s: f64, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((tau, xi), c) in self.tau.iter().zip(&self.xi).zip(&self.coeff) {
            let phase = tau * s + xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            acc += (c * Complex64::from_polar(1.0, -2.0 * PI * phase)).re;
        }
        acc
    }
}

/// `E exp(∫₀ᵗ F̃h(s, X_s) ds - ‖h‖²/(2(p-ρ)))`, a lower bound for `‖u^ρ(t,x)‖_p`.
///
/// `F̃h` is summed directly over the lattice with `μ0 ⊗ μ` cell masses, and the
/// time integral uses the left-point rule on the path grid.
pub fn variational_lower_bound_mc(h: &LatticeFunction, config: &ExperimentConfig, t: f64) -> Result<EstimateRecord> {
    config.validate()?;
    if config.p - config.rho <= 0.0 {
        return Err(Error::invalid("the lower bound needs p > rho"));
    }
    let terms = WeightedTerms::new(h, &config.spec)?;
    let started = Instant::now();
    let penalty = terms.norm_sq / (2.0 * (config.p - config.rho));
    let logs = (0..config.n_replicas)
        .into_par_iter()
        .map(|r| {
            let path = config.path(t, r, 0)?;
            let dt = path.dt();
            let integral: f64 = (0..path.n_steps())
                .map(|k| terms.eval(path.time(k), path.position(k)))
                .sum::<f64>()
                * dt;
            Ok(integral - penalty)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateRecord::from_log_mean(
        Estimator::LowerBound { n_terms: terms.coeff.len() },
        RecordConfig::Experiment(config.clone()),
        t,
        log_mean_exp(&logs)?,
        config.n_replicas,
        started,
    ))
}

/// Space-time potential on `[0,1] × 𝕋_M^d` from uniform slices `s_i = i/(n-1)`,
/// linear in time and multilinear in space.
fn potential_at(slices: &[TorusField], s: f64, x: &[f64]) -> f64 {
    if slices.len() == 1 {
        return slices[0].interpolate(x);
    }
    let u = s.clamp(0.0, 1.0) * (slices.len() - 1) as f64;
    let i = (u.floor() as usize).min(slices.len() - 2);
    let w = u - i as f64;
    let a = slices[i].interpolate(x);
    if w == 0.0 {
        a
    } else {
        (1.0 - w) * a + w * slices[i + 1].interpolate(x)
    }
}

/// `(1/t) log E exp(∫₀ᵗ f(s/t, X^M_s) ds)` for the torus-reduced process from the origin.
pub fn fk_limit_mc(slices: &[TorusField], config: &FkConfig) -> Result<EstimateRecord> {
    let first = slices.first().ok_or_else(|| Error::invalid("need at least one slice"))?;
    let grid = *first.grid();
    if slices.iter().any(|f| *f.grid() != grid) {
        return Err(Error::GridMismatch("potential slices live on different grids".into()));
    }
    if !(config.alpha > 0.0 && config.alpha <= 2.0) {
        return Err(Error::invalid(format!("alpha = {} not in (0, 2]", config.alpha)));
    }
    if !(config.t > 0.0) || config.n_replicas == 0 || config.n_steps == 0 {
        return Err(Error::invalid("t, n_replicas and n_steps must be positive"));
    }
    let started = Instant::now();
    let dt = config.t / config.n_steps as f64;
    let dim = grid.dim;
    let logs: Vec<f64> = (0..config.n_replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(config.master_seed, &[r as u64, 0]);
            let mut x = vec![0.0; dim];
            let mut inc = vec![0.0; dim];
            let mut acc = 0.0;
            for k in 0..config.n_steps {
                let s = k as f64 / config.n_steps as f64;
                acc += potential_at(slices, s, &x);
                sample_increment(config.alpha, dt, &mut rng, &mut inc);
                for (xa, da) in x.iter_mut().zip(&inc) {
                    *xa = wrap(*xa + da, grid.period);
                }
            }
            acc * dt
        })
        .collect();
    let lm = log_mean_exp(&logs)?;
    Ok(EstimateRecord {
        estimator: Estimator::FeynmanKac,
        config: RecordConfig::FeynmanKac(config.clone()),
        t: config.t,
        point_estimate: lm.log_mean / config.t,
        stderr: lm.log_stderr / config.t,
        log_estimate: lm.log_mean,
        log_stderr: lm.log_stderr,
        effective_sample_size: lm.ess,
        n_replicas: config.n_replicas,
        master_seed: config.master_seed,
        wall_time: Some(started.elapsed()),
    })
}
