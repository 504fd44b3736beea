//! Symmetric α-stable paths.
//!
//! Increments are exact in law with characteristic function
//! `E exp(i λ·X_dt) = exp(-dt |λ|^α)`. In one dimension they come from the
//! Chambers-Mallows-Stuck transform; in higher dimensions from subordination,
//! `X = sqrt(2 S) G` with `G` standard normal and `S` a positive (α/2)-stable
//! variable with Laplace transform `exp(-u^(α/2))` (Kanter's representation).
//! At α = 2 both reduce to a Gaussian with covariance `2 dt I`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub dim: usize,
    pub alpha: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("path dim must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!("alpha = {} not in (0, 2]", self.alpha)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive and finite"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// A trajectory on the uniform grid `t_k = k · horizon / n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    horizon: f64,
    n_steps: usize,
    /// Row-major `(n_steps + 1) × dim`.
    positions: Vec<f64>,
}

impl Path {
    /// Wraps precomputed positions. The first row need not be the origin,
    /// which lets tests build deterministic paths.
    pub fn from_positions(dim: usize, horizon: f64, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 || !positions.len().is_multiple_of(dim) || positions.len() < 2 * dim {
            return Err(Error::invalid(format!(
                "need at least two rows of {dim} coordinates, got {} values",
                positions.len()
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(Self {
            dim,
            horizon,
            n_steps: positions.len() / dim - 1,
            positions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn endpoint(&self) -> &[f64] {
        self.position(self.n_steps)
    }

    /// Same grid on both paths: equal step count, dimension and horizon.
    pub fn same_grid(&self, other: &Path) -> bool {
        self.dim == other.dim && self.n_steps == other.n_steps && self.horizon == other.horizon
    }

    /// Writes `# {PathSpec json}` followed by `t,x1,...,xd` rows.
    pub fn write_csv<W: Write>(&self, spec: &PathSpec, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(spec)?)?;
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim).map(|j| format!("x{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for k in 0..=self.n_steps {
            let mut line = format!("{}", self.time(k));
            for v in self.position(k) {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<(PathSpec, Path)> {
        let mut lines = input.lines();
        let first = lines.next().ok_or_else(|| Error::invalid("empty path file"))??;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::invalid("path file must start with a `# {json}` header"))?;
        let spec: PathSpec = serde_json::from_str(json)?;
        lines.next().ok_or_else(|| Error::invalid("missing column header"))??;
        let mut positions = Vec::with_capacity((spec.n_steps + 1) * spec.dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            fields.next();
            for f in fields {
                positions.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad coordinate `{f}`: {e}")))?,
                );
            }
        }
        if positions.len() != (spec.n_steps + 1) * spec.dim {
            return Err(Error::invalid(format!(
                "path file has {} coordinates, header promises {}",
                positions.len(),
                (spec.n_steps + 1) * spec.dim
            )));
        }
        let path = Path::from_positions(spec.dim, spec.horizon, positions)?;
        Ok((spec, path))
    }
}

/// A path reduced modulo `M` coordinate-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPath {
    pub period: f64,
    pub dim: usize,
    pub positions: Vec<f64>,
}

impl TorusPath {
    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }
}

/// Mathematical remainder in `[0, m)`.
pub fn wrap(x: f64, m: f64) -> f64 {
    let r = x.rem_euclid(m);
    // rem_euclid can round up to m for tiny negative inputs
    if r >= m {
        0.0
    } else {
        r
    }
}

pub fn to_torus(path: &Path, period: f64) -> Result<TorusPath> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(format!("torus period {period} must be positive")));
    }
    Ok(TorusPath {
        period,
        dim: path.dim,
        positions: path.positions.iter().map(|x| wrap(*x, period)).collect(),
    })
}

/// One standard symmetric α-stable variate, `E e^(iλX) = e^(-|λ|^α)`.
pub fn standard_stable_1d<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 2.0 {
        let w: f64 = Exp1.sample(rng);
        return 2.0 * v.sin() * w.sqrt();
    }
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * ((v * (1.0 - alpha)).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive `a`-stable variate with `E e^(-uS) = e^(-u^a)`, `a ∈ (0, 1]`.
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return 1.0;
    }
    // U strictly inside (0, π)
    let u = PI * (1.0 - rng.random::<f64>());
    let u = if u >= PI { PI * 0.5 } else { u };
    let w: f64 = Exp1.sample(rng);
    (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
}

/// Writes one increment `X_dt` into `out` (length `d`).
pub fn sample_increment<R: Rng + ?Sized>(alpha: f64, dt: f64, rng: &mut R, out: &mut [f64]) {
    let scale = dt.powf(1.0 / alpha);
    if out.len() == 1 {
        out[0] = scale * standard_stable_1d(alpha, rng);
        return;
    }
    let s = positive_stable(0.5 * alpha, rng);
    let amp = scale * (2.0 * s).sqrt();
    for x in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *x = amp * g;
    }
}

/// Cumulative sum of independent increments starting at the origin.
pub fn sample_path_with<R: Rng + ?Sized>(spec: &PathSpec, rng: &mut R) -> Result<Path> {
    spec.validate()?;
    let d = spec.dim;
    let dt = spec.dt();
    let mut positions = vec![0.0; (spec.n_steps + 1) * d];
    let mut inc = vec![0.0; d];
    for k in 1..=spec.n_steps {
        sample_increment(spec.alpha, dt, rng, &mut inc);
        for j in 0..d {
            positions[k * d + j] = positions[(k - 1) * d + j] + inc[j];
        }
    }
    Path::from_positions(d, spec.horizon, positions)
}

/// Path drawn from the stream seeded by `spec.seed`.
pub fn sample_path(spec: &PathSpec) -> Result<Path> {
    let mut r = rng::stream(spec.seed, &[]);
    sample_path_with(spec, &mut r)
}
