//! Run configurations, one variant per pipeline.

use std::f64::consts::PI;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::QuadratureRule;
use crate::kernels::{NoiseSpec, Regime};
use crate::montecarlo::{ExperimentConfig, FkConfig, LatticeFunction};
use crate::spectral::{EigenOptions, TorusField, TorusGrid};
use crate::stable::PathSpec;
use crate::variational::VariationalOptions;

fn default_quad_tol() -> f64 {
    1e-8
}

fn default_one() -> usize {
    1
}

fn default_thetas() -> Vec<f64> {
    vec![1.0]
}

fn default_p_values() -> Vec<f64> {
    vec![1.0, 2.0, 3.0]
}

/// A spatial potential on the torus, possibly time-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSource {
    /// `amplitude (1 + growth·s) Π exp((cos(2π(x_j - c_j)/M) - 1) / (2πw/M)²)`:
    /// a smooth periodic bump of width about `w`.
    Bump {
        period: f64,
        n: usize,
        dim: usize,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        growth: f64,
        #[serde(default = "default_one")]
        slices: usize,
    },
    /// Grid CSV with header `x1,..,xd,value` or `s,x1,..,xd,value`.
    Csv { path: PathBuf, period: f64 },
}

impl FieldSource {
    /// Slices at `s_i = i/(n-1)`, resolving relative CSV paths against `base`.
    pub fn load(&self, base: &FsPath) -> Result<Vec<TorusField>> {
        match self {
            FieldSource::Bump {
                period,
                n,
                dim,
                amplitude,
                width,
                center,
                growth,
                slices,
            } => {
                let grid = TorusGrid::new(*period, *n, *dim)?;
                if *slices == 0 {
                    return Err(Error::invalid("slices must be positive"));
                }
                if !(*width > 0.0) {
                    return Err(Error::invalid("bump width must be positive"));
                }
                let c = center.clone().unwrap_or_else(|| vec![period / 2.0; *dim]);
                if c.len() != *dim {
                    return Err(Error::invalid("bump centre has the wrong dimension"));
                }
                let kappa = (period / (2.0 * PI * width)).powi(2);
                (0..*slices)
                    .map(|i| {
                        let s = if *slices == 1 { 0.0 } else { i as f64 / (*slices - 1) as f64 };
                        let scale = amplitude * (1.0 + growth * s);
                        TorusField::from_fn(grid, |x| {
                            let e: f64 = x
                                .iter()
                                .zip(&c)
                                .map(|(xj, cj)| ((2.0 * PI * (xj - cj) / period).cos() - 1.0) * kappa)
                                .sum();
                            scale * e.exp()
                        })
                    })
                    .collect()
            }
            FieldSource::Csv { path, period } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full)?;
                read_field_csv(&text, *period)
            }
        }
    }
}

/// Parses a grid CSV; rows may come in any order.
pub fn read_field_csv(text: &str, period: f64) -> Result<Vec<TorusField>> {
    let bad = |m: String| Error::ConfigInvalid {
        field: "field".into(),
        message: m,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty field CSV".into()))?.split(',').map(str::trim).collect();
    let timed = header.first() == Some(&"s");
    let dim = header.len() - 1 - usize::from(timed);
    if !(1..=3).contains(&dim) || header.last() != Some(&"value") {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        if v.len() != header.len() {
            return Err(bad(format!("row {} has {} columns", i + 2, v.len())));
        }
        let (s, rest) = if timed { (v[0], &v[1..]) } else { (0.0, &v[..]) };
        rows.push((s, rest[..dim].to_vec(), rest[dim]));
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let per_slice = rows.len() / times.len();
    let n = (per_slice as f64).powf(1.0 / dim as f64).round() as usize;
    if n.pow(dim as u32) * times.len() != rows.len() {
        return Err(bad(format!("{} rows do not form {} full grids", rows.len(), times.len())));
    }
    let grid = TorusGrid::new(period, n, dim)?;
    let h = grid.spacing();
    let mut values = vec![vec![f64::NAN; grid.len()]; times.len()];
    for (s, x, v) in rows {
        let si = times.iter().position(|t| *t == s).expect("time collected above");
        let mut idx = 0;
        for xj in &x {
            let k = (xj / h).round();
            if (xj / h - k).abs() > 1e-6 || k < 0.0 || k as usize >= n {
                return Err(bad(format!("coordinate {xj} is not on the grid of spacing {h}")));
            }
            idx = idx * n + k as usize;
        }
        values[si][idx] = v;
    }
    values
        .into_iter()
        .map(|v| {
            if v.iter().any(|x| x.is_nan()) {
                return Err(bad("grid has missing points".into()));
            }
            TorusField::from_values(grid, v)
        })
        .collect()
}

/// Monte Carlo settings for the theorem check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub t_grid: Vec<f64>,
    pub n_replicas: usize,
    pub n_steps: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
}

/// Everything one invocation can run, tagged by `"pipeline"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunConfig {
    KernelsValidate {
        spec: NoiseSpec,
        #[serde(default = "default_quad_tol")]
        quad_tol: f64,
    },
    SamplePaths {
        path: PathSpec,
        #[serde(default = "default_one")]
        count: usize,
    },
    EstimateHamiltonian {
        spec: NoiseSpec,
        t: f64,
        n_samples: usize,
        n_steps: usize,
        #[serde(default)]
        rule: QuadratureRule,
        seed: u64,
    },
    ExpMoment {
        experiment: ExperimentConfig,
        thetas: Vec<f64>,
    },
    Moment {
        experiment: ExperimentConfig,
    },
    Lyapunov {
        experiment: ExperimentConfig,
        /// Variational constant used for the prediction column, if known.
        #[serde(default)]
        m_value: Option<f64>,
    },
    LowerBound {
        experiment: ExperimentConfig,
        test_function: LatticeFunction,
    },
    FkCheck {
        field: FieldSource,
        fk: FkConfig,
        k_trunc: usize,
        #[serde(default)]
        eigen: EigenOptions,
    },
    Lambda {
        field: FieldSource,
        alpha: f64,
        k_trunc: Vec<usize>,
        #[serde(default)]
        eigen: EigenOptions,
    },
    SolveVariational {
        spec: NoiseSpec,
        box_size: f64,
        grid_n: usize,
        n_t: usize,
        #[serde(default = "default_thetas")]
        thetas: Vec<f64>,
        #[serde(default)]
        options: VariationalOptions,
    },
    FullTheoremCheck {
        spec: NoiseSpec,
        box_size: f64,
        grid_n: usize,
        n_t: usize,
        #[serde(default)]
        options: VariationalOptions,
        #[serde(default = "default_p_values")]
        p_values: Vec<f64>,
        rho: f64,
        mc: McSettings,
        seed: u64,
    },
}

fn config_err(field: &str, e: Error) -> Error {
    match e {
        Error::ConfigInvalid { .. } => e,
        other => Error::ConfigInvalid {
            field: field.into(),
            message: other.to_string(),
        },
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid {
            field: field.into(),
            message: format!("must be positive, got {v}"),
        })
    }
}

fn nonzero(field: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid {
            field: field.into(),
            message: "must be positive".into(),
        })
    }
}

impl RunConfig {
    /// Parses JSON, mapping every failure to a configuration error.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn pipeline(&self) -> &'static str {
        match self {
            RunConfig::KernelsValidate { .. } => "kernels-validate",
            RunConfig::SamplePaths { .. } => "sample-paths",
            RunConfig::EstimateHamiltonian { .. } => "estimate-hamiltonian",
            RunConfig::ExpMoment { .. } => "exp-moment",
            RunConfig::Moment { .. } => "moment",
            RunConfig::Lyapunov { .. } => "lyapunov",
            RunConfig::LowerBound { .. } => "lower-bound",
            RunConfig::FkCheck { .. } => "fk-check",
            RunConfig::Lambda { .. } => "lambda",
            RunConfig::SolveVariational { .. } => "solve-variational",
            RunConfig::FullTheoremCheck { .. } => "full-theorem-check",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::KernelsValidate { .. } | RunConfig::Lambda { .. } => 0,
            RunConfig::SamplePaths { path, .. } => path.seed,
            RunConfig::EstimateHamiltonian { seed, .. } | RunConfig::FullTheoremCheck { seed, .. } => *seed,
            RunConfig::ExpMoment { experiment, .. }
            | RunConfig::Moment { experiment }
            | RunConfig::Lyapunov { experiment, .. }
            | RunConfig::LowerBound { experiment, .. } => experiment.master_seed,
            RunConfig::FkCheck { fk, .. } => fk.master_seed,
            RunConfig::SolveVariational { options, .. } => options.seed,
        }
    }

    pub fn set_seed(&mut self, s: u64) {
        match self {
            RunConfig::KernelsValidate { .. } | RunConfig::Lambda { .. } => {}
            RunConfig::SamplePaths { path, .. } => path.seed = s,
            RunConfig::EstimateHamiltonian { seed, .. } => *seed = s,
            RunConfig::FullTheoremCheck { seed, options, .. } => {
                *seed = s;
                options.seed = s;
            }
            RunConfig::ExpMoment { experiment, .. }
            | RunConfig::Moment { experiment }
            | RunConfig::Lyapunov { experiment, .. }
            | RunConfig::LowerBound { experiment, .. } => experiment.master_seed = s,
            RunConfig::FkCheck { fk, .. } => fk.master_seed = s,
            RunConfig::SolveVariational { options, .. } => options.seed = s,
        }
    }

    /// Field-level checks plus the regime each pipeline needs.
    pub fn validate(&self) -> Result<()> {
        let pipeline = self.pipeline();
        let need = |spec: &NoiseSpec, required: &[Regime], label: &str| -> Result<()> {
            let actual = spec.regime();
            if required.contains(&actual) {
                Ok(())
            } else {
                Err(Error::RegimeMismatch {
                    pipeline: pipeline.into(),
                    required: label.into(),
                    actual,
                })
            }
        };
        let full = [Regime::Full];
        let skorohod = [Regime::Full, Regime::SkorohodOnly];
        match self {
            RunConfig::KernelsValidate { spec, quad_tol } => {
                spec.validate().map_err(|e| config_err("spec", e))?;
                positive("quad_tol", *quad_tol)
            }
            RunConfig::SamplePaths { path, count } => {
                path.validate().map_err(|e| config_err("path", e))?;
                nonzero("count", *count)
            }
            RunConfig::EstimateHamiltonian {
                spec, t, n_samples, n_steps, ..
            } => {
                spec.validate().map_err(|e| config_err("spec", e))?;
                positive("t", *t)?;
                nonzero("n_samples", *n_samples)?;
                nonzero("n_steps", *n_steps)?;
                need(spec, &full, "full (alpha*beta0 + beta < alpha)")
            }
            RunConfig::ExpMoment { experiment, thetas } => {
                experiment.validate().map_err(|e| config_err("experiment", e))?;
                if thetas.is_empty() {
                    return Err(Error::ConfigInvalid {
                        field: "thetas".into(),
                        message: "need at least one theta".into(),
                    });
                }
                for th in thetas {
                    positive("thetas", *th)?;
                }
                need(&experiment.spec, &full, "full (alpha*beta0 + beta < alpha)")
            }
            RunConfig::Moment { experiment } | RunConfig::Lyapunov { experiment, .. } | RunConfig::LowerBound { experiment, .. } => {
                experiment.validate().map_err(|e| config_err("experiment", e))?;
                experiment.integer_p().map_err(|e| config_err("experiment.p", e))?;
                if experiment.rho < 1.0 {
                    need(&experiment.spec, &full, "full (rho < 1 needs alpha*beta0 + beta < alpha)")?;
                } else {
                    need(&experiment.spec, &skorohod, "skorohod-only or full (beta < alpha)")?;
                }
                if let RunConfig::Lyapunov { m_value: Some(m), .. } = self {
                    positive("m_value", *m)?;
                }
                if let RunConfig::LowerBound { .. } = self {
                    if experiment.p <= experiment.rho {
                        return Err(Error::ConfigInvalid {
                            field: "experiment.p".into(),
                            message: "the lower bound needs p > rho".into(),
                        });
                    }
                }
                Ok(())
            }
            RunConfig::FkCheck { fk, k_trunc, .. } => {
                positive("fk.t", fk.t)?;
                positive("fk.alpha", fk.alpha)?;
                nonzero("fk.n_replicas", fk.n_replicas)?;
                nonzero("fk.n_steps", fk.n_steps)?;
                nonzero("k_trunc", *k_trunc)
            }
            RunConfig::Lambda { alpha, k_trunc, .. } => {
                positive("alpha", *alpha)?;
                if k_trunc.is_empty() {
                    return Err(Error::ConfigInvalid {
                        field: "k_trunc".into(),
                        message: "need at least one truncation".into(),
                    });
                }
                Ok(())
            }
            RunConfig::SolveVariational {
                spec,
                box_size,
                grid_n,
                n_t,
                thetas,
                ..
            } => {
                spec.validate().map_err(|e| config_err("spec", e))?;
                TorusGrid::new(*box_size, *grid_n, spec.dim).map_err(|e| config_err("grid_n", e))?;
                nonzero("n_t", *n_t)?;
                for th in thetas {
                    positive("thetas", *th)?;
                }
                need(spec, &full, "full (alpha*beta0 + beta < alpha)")
            }
            RunConfig::FullTheoremCheck {
                spec,
                box_size,
                grid_n,
                n_t,
                p_values,
                rho,
                mc,
                ..
            } => {
                spec.validate().map_err(|e| config_err("spec", e))?;
                TorusGrid::new(*box_size, *grid_n, spec.dim).map_err(|e| config_err("grid_n", e))?;
                nonzero("n_t", *n_t)?;
                nonzero("mc.n_replicas", mc.n_replicas)?;
                nonzero("mc.n_steps", mc.n_steps)?;
                if !(0.0..=1.0).contains(rho) {
                    return Err(Error::ConfigInvalid {
                        field: "rho".into(),
                        message: format!("{rho} not in [0, 1]"),
                    });
                }
                if p_values.iter().any(|p| !(*p >= 1.0)) {
                    return Err(Error::ConfigInvalid {
                        field: "p_values".into(),
                        message: "every p must be ≥ 1".into(),
                    });
                }
                need(spec, &full, "full (alpha*beta0 + beta < alpha)")
            }
        }
    }
}
