//! Pipeline execution: config in, records and manifest entry out.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{EntryWriter, ManifestEntry, RunDir};
use crate::error::{Error, Result};
use crate::functionals::expected_h;
use crate::kernels::{compute_constants, verify_identities, IdentityCheck, KernelConstants, NoiseSpec, Regime};
use crate::montecarlo::{
    exp_moment_sweep, fk_limit_mc, hamiltonian_samples, lyapunov_fit, moment_u_rho, t_p, variational_lower_bound_mc,
    EstimateRecord, ExperimentConfig, FitPoint, LyapunovFit,
};
use crate::rng::derive_seed;
use crate::spectral::{lambda_m, lambda_time_integral, EigenSolution, TorusGrid};
use crate::stable::{sample_path, PathSpec};
use crate::stats::mean_stderr;
use crate::variational::{critical_constant, lyapunov_prediction, maximize_m, VariationalOptions};

/// Identity checks must agree to this relative error.
pub const IDENTITY_TOL: f64 = 1e-4;

pub const RECORDS_FILE: &str = "records.json";
pub const LYAPUNOV_FILE: &str = "lyapunov.json";
pub const VARIATIONAL_FILE: &str = "variational.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelReport {
    pub spec: NoiseSpec,
    pub regime: Regime,
    pub constants: KernelConstants,
    pub checks: Vec<IdentityCheck>,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamiltonianReport {
    pub spec: NoiseSpec,
    pub t: f64,
    pub n_samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub spec: NoiseSpec,
    pub p: f64,
    pub rho: f64,
    pub m_value: Option<f64>,
    /// `p (p-ρ)^(α/(α-β)) M`, the predicted slope of `log E|u|^p` in `t^χ`.
    pub predicted_slope: Option<f64>,
    pub fit: Option<LyapunovFit>,
    pub records: Vec<EstimateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub t: f64,
    pub lower_bound: EstimateRecord,
    pub moment: EstimateRecord,
    /// `‖u‖_p = (E|u|^p)^(1/p)`.
    pub moment_root: f64,
    pub moment_root_stderr: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FkReport {
    pub fk: EstimateRecord,
    pub lambda_integral: f64,
    pub k_trunc: usize,
    pub difference: f64,
    /// `3·stderr + 0.5/t`.
    pub budget: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaRow {
    pub k_trunc: usize,
    pub lambda: f64,
    /// Per-slice solutions; empty when the field has several slices.
    pub solution: Option<EigenSolution>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationalSummary {
    pub spec: NoiseSpec,
    pub grid: TorusGrid,
    pub n_t: usize,
    pub theta: f64,
    pub m_estimate: f64,
    pub interaction: f64,
    pub energy: f64,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    pub restart_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremRow {
    pub p: f64,
    pub rho: f64,
    pub prediction: f64,
    pub mc_normalized_slope: Option<f64>,
    pub mc_r2: Option<f64>,
    pub records: Vec<EstimateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    pub variational: VariationalSummary,
    pub critical_constant: f64,
    pub rows: Vec<TheoremRow>,
}

/// What a finished run hands back to the caller.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub entry: ManifestEntry,
    /// One-line human summary.
    pub headline: String,
}

/// Reads, validates and runs a config file. Nothing is written unless the
/// config is valid.
pub fn run_config_file(path: &FsPath, out_dir: &FsPath, seed: Option<u64>) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid {
        field: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(s) = seed {
        config.set_seed(s);
    }
    let base = path.parent().unwrap_or(FsPath::new("."));
    run_experiment(&config, out_dir, base)
}

/// Runs one pipeline into `out_dir`; `base` resolves relative input paths.
pub fn run_experiment(config: &RunConfig, out_dir: &FsPath, base: &FsPath) -> Result<RunSummary> {
    config.validate()?;
    let mut run = RunDir::open(out_dir)?;
    let mut w = run.begin(config.pipeline(), serde_json::to_value(config)?, config.seed());
    let headline = execute(config, base, &mut w)?;
    let entry = w.finish()?;
    Ok(RunSummary { entry, headline })
}

pub(crate) fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub(crate) fn records_csv(records: &[EstimateRecord]) -> String {
    csv(
        &["t", "log_estimate", "stderr", "ess", "seed"],
        records
            .iter()
            .map(|r| vec![r.t, r.log_estimate, r.log_stderr, r.effective_sample_size, r.master_seed as f64]),
    )
}

fn write_records(w: &mut EntryWriter<'_>, records: &[EstimateRecord]) -> Result<()> {
    w.write_json(RECORDS_FILE, &records)?;
    w.write_bytes("records.csv", records_csv(records).as_bytes())?;
    Ok(())
}

fn moments_over_grid(experiment: &ExperimentConfig) -> Result<Vec<EstimateRecord>> {
    experiment.t_grid.iter().map(|t| moment_u_rho(experiment, *t)).collect()
}

fn try_fit(records: &[EstimateRecord], spec: &NoiseSpec, p: f64, rho: f64) -> Option<LyapunovFit> {
    let points: Vec<FitPoint> = records.iter().map(FitPoint::from).collect();
    match lyapunov_fit(&points, spec, p, rho) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no growth fit for p = {p}: {e}");
            None
        }
    }
}

fn summarize(spec: &NoiseSpec, grid: TorusGrid, n_t: usize, opts: &VariationalOptions) -> Result<VariationalSummary> {
    let r = maximize_m(spec, grid, n_t, opts)?;
    if !r.converged {
        log::warn!("optimizer stopped at max_iter with gradient norm {:e}", r.final_gradient_norm);
    }
    Ok(VariationalSummary {
        spec: spec.clone(),
        grid,
        n_t,
        theta: r.theta,
        m_estimate: r.m_estimate,
        interaction: r.interaction,
        energy: r.energy,
        iterations: r.iterations,
        final_gradient_norm: r.final_gradient_norm,
        converged: r.converged,
        restart_values: r.restart_values,
    })
}

fn execute(config: &RunConfig, base: &FsPath, w: &mut EntryWriter<'_>) -> Result<String> {
    match config {
        RunConfig::KernelsValidate { spec, quad_tol } => {
            let constants = compute_constants(spec, *quad_tol)?;
            let checks = verify_identities(spec, &constants, *quad_tol)?;
            let max_rel_err = checks.iter().map(|c| c.rel_err).fold(0.0, f64::max);
            let report = KernelReport {
                spec: spec.clone(),
                regime: spec.regime(),
                constants,
                checks,
                max_rel_err,
            };
            w.write_json("kernels.json", &report)?;
            if !(max_rel_err <= IDENTITY_TOL) {
                let worst = report
                    .checks
                    .iter()
                    .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
                    .map(|c| format!("{} at {:?}", c.name, c.probe))
                    .unwrap_or_default();
                return Err(Error::CheckFailed(format!("identity {worst} has relative error {max_rel_err:e}")));
            }
            Ok(format!(
                "{} identity checks passed, max relative error {max_rel_err:.3e}",
                report.checks.len()
            ))
        }
        RunConfig::SamplePaths { path, count } => {
            for i in 0..*count {
                let spec = PathSpec {
                    seed: if *count == 1 { path.seed } else { derive_seed(path.seed, &[i as u64]) },
                    ..path.clone()
                };
                let p = sample_path(&spec)?;
                let mut buf = Vec::new();
                p.write_csv(&spec, &mut buf)?;
                w.write_bytes(&format!("path-{i}.csv"), &buf)?;
            }
            Ok(format!("wrote {count} path(s) of {} steps", path.n_steps))
        }
        RunConfig::EstimateHamiltonian {
            spec,
            t,
            n_samples,
            n_steps,
            rule,
            seed,
        } => {
            let experiment = ExperimentConfig {
                spec: spec.clone(),
                p: 1.0,
                rho: 0.0,
                t_grid: vec![*t],
                n_replicas: *n_samples,
                n_steps: *n_steps,
                master_seed: *seed,
                rule: *rule,
            };
            let samples = hamiltonian_samples(&experiment, *t)?;
            let (mean, stderr) = mean_stderr(&samples);
            let expected = expected_h(spec, *t)?;
            let report = HamiltonianReport {
                spec: spec.clone(),
                t: *t,
                n_samples: *n_samples,
                mean,
                stderr,
                expected,
                z_score: (mean - expected) / stderr,
            };
            w.write_json("hamiltonian.json", &report)?;
            w.write_bytes("samples.csv", csv(&["h"], samples.iter().map(|h| vec![*h])).as_bytes())?;
            Ok(format!("mean H = {mean:.6} ± {stderr:.2e}, expected {expected:.6}"))
        }
        RunConfig::ExpMoment { experiment, thetas } => {
            let mut records = Vec::new();
            for t in &experiment.t_grid {
                records.extend(exp_moment_sweep(experiment, thetas, *t)?);
            }
            write_records(w, &records)?;
            Ok(format!("{} exponential-moment records", records.len()))
        }
        RunConfig::Moment { experiment } => {
            let records = moments_over_grid(experiment)?;
            write_records(w, &records)?;
            Ok(format!("{} moment records", records.len()))
        }
        RunConfig::Lyapunov { experiment, m_value } => {
            let records = moments_over_grid(experiment)?;
            let (spec, p, rho) = (&experiment.spec, experiment.p, experiment.rho);
            let fit = try_fit(&records, spec, p, rho);
            let predicted_slope = match m_value {
                Some(m) => Some(p * lyapunov_prediction(spec, p, rho, *m)?),
                None => None,
            };
            write_records(w, &records)?;
            let report = LyapunovReport {
                spec: spec.clone(),
                p,
                rho,
                m_value: *m_value,
                predicted_slope,
                fit,
                records,
            };
            w.write_json(LYAPUNOV_FILE, &report)?;
            Ok(match &report.fit {
                Some(f) => format!("slope/p = {:.6} (r² = {:.4}) over {} horizons", f.normalized_slope, f.r2, f.used),
                None => "moments written; too few usable horizons for a fit".into(),
            })
        }
        RunConfig::LowerBound { experiment, test_function } => {
            let q = experiment.p;
            let mut rows = Vec::new();
            for t in &experiment.t_grid {
                let lower_bound = variational_lower_bound_mc(test_function, experiment, *t)?;
                let moment = moment_u_rho(experiment, *t)?;
                let root = moment.point_estimate.powf(1.0 / q);
                let root_se = root / q * moment.stderr / moment.point_estimate;
                let combined = (lower_bound.stderr.powi(2) + root_se.powi(2)).sqrt();
                rows.push(LowerBoundRow {
                    t: *t,
                    consistent: lower_bound.point_estimate <= root + 3.0 * combined,
                    lower_bound,
                    moment,
                    moment_root: root,
                    moment_root_stderr: root_se,
                });
            }
            w.write_json("lower-bound.json", &rows)?;
            w.write_bytes(
                "lower-bound.csv",
                csv(
                    &["t", "lower_bound", "lower_bound_stderr", "moment_root", "moment_root_stderr"],
                    rows.iter().map(|r| {
                        vec![r.t, r.lower_bound.point_estimate, r.lower_bound.stderr, r.moment_root, r.moment_root_stderr]
                    }),
                )
                .as_bytes(),
            )?;
            let bad = rows.iter().filter(|r| !r.consistent).count();
            if bad > 0 {
                return Err(Error::CheckFailed(format!("lower bound exceeds the moment at {bad} horizon(s)")));
            }
            Ok(format!("lower bound below the moment at all {} horizons", rows.len()))
        }
        RunConfig::FkCheck { field, fk, k_trunc, eigen } => {
            let slices = field.load(base)?;
            let lambda_integral = lambda_time_integral(&slices, fk.alpha, *k_trunc, eigen)?;
            let record = fk_limit_mc(&slices, fk)?;
            let difference = (record.point_estimate - lambda_integral).abs();
            let budget = 3.0 * record.stderr + 0.5 / fk.t;
            let report = FkReport {
                agrees: difference <= budget,
                fk: record,
                lambda_integral,
                k_trunc: *k_trunc,
                difference,
                budget,
            };
            w.write_json("fk-check.json", &report)?;
            w.write_json(RECORDS_FILE, &[&report.fk])?;
            Ok(format!(
                "Feynman-Kac {:.6} vs eigenvalue {:.6}: |diff| = {:.2e} (budget {:.2e})",
                report.fk.point_estimate, lambda_integral, difference, budget
            ))
        }
        RunConfig::Lambda {
            field,
            alpha,
            k_trunc,
            eigen,
        } => {
            let slices = field.load(base)?;
            let rows = k_trunc
                .iter()
                .map(|k| {
                    if slices.len() == 1 {
                        let s = lambda_m(&slices[0], *alpha, *k, eigen)?;
                        Ok(LambdaRow {
                            k_trunc: *k,
                            lambda: s.lambda,
                            solution: Some(s),
                        })
                    } else {
                        Ok(LambdaRow {
                            k_trunc: *k,
                            lambda: lambda_time_integral(&slices, *alpha, *k, eigen)?,
                            solution: None,
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            w.write_json("lambda.json", &rows)?;
            w.write_bytes(
                "lambda.csv",
                csv(&["k_trunc", "lambda"], rows.iter().map(|r| vec![r.k_trunc as f64, r.lambda])).as_bytes(),
            )?;
            let last = rows.last().map(|r| r.lambda).unwrap_or(f64::NAN);
            Ok(format!("lambda = {last:.10} at the largest truncation"))
        }
        RunConfig::SolveVariational {
            spec,
            box_size,
            grid_n,
            n_t,
            thetas,
            options,
        } => {
            let grid = TorusGrid::new(*box_size, *grid_n, spec.dim)?;
            let mut out = Vec::new();
            for theta in thetas {
                let opts = VariationalOptions { theta: *theta, ..*options };
                let r = maximize_m(spec, grid, *n_t, &opts)?;
                let mut buf = Vec::new();
                r.field.write_csv(&mut buf)?;
                w.write_bytes(&format!("field-theta-{theta}.csv"), &buf)?;
                out.push(VariationalSummary {
                    spec: spec.clone(),
                    grid,
                    n_t: *n_t,
                    theta: r.theta,
                    m_estimate: r.m_estimate,
                    interaction: r.interaction,
                    energy: r.energy,
                    iterations: r.iterations,
                    final_gradient_norm: r.final_gradient_norm,
                    converged: r.converged,
                    restart_values: r.restart_values,
                });
            }
            w.write_json(VARIATIONAL_FILE, &out)?;
            let text: Vec<String> = out.iter().map(|s| format!("M(θ={}) = {:.8}", s.theta, s.m_estimate)).collect();
            Ok(text.join(", "))
        }
        RunConfig::FullTheoremCheck {
            spec,
            box_size,
            grid_n,
            n_t,
            options,
            p_values,
            rho,
            mc,
            seed,
        } => {
            let grid = TorusGrid::new(*box_size, *grid_n, spec.dim)?;
            let opts = VariationalOptions { theta: 1.0, ..*options };
            let variational = summarize(spec, grid, *n_t, &opts)?;
            let m = variational.m_estimate;
            let mut rows = Vec::new();
            for p in p_values {
                if *p == 1.0 && *rho == 1.0 {
                    log::warn!("skipping (p, rho) = (1, 1): the moment is identically one");
                    continue;
                }
                let prediction = lyapunov_prediction(spec, *p, *rho, m)?;
                let (records, fit) = if p.fract() == 0.0 {
                    let experiment = ExperimentConfig {
                        spec: spec.clone(),
                        p: *p,
                        rho: *rho,
                        t_grid: mc.t_grid.clone(),
                        n_replicas: mc.n_replicas,
                        n_steps: mc.n_steps,
                        master_seed: *seed,
                        rule: mc.rule,
                    };
                    let records = moments_over_grid(&experiment)?;
                    let fit = try_fit(&records, spec, *p, *rho);
                    (records, fit)
                } else {
                    (Vec::new(), None)
                };
                rows.push(TheoremRow {
                    p: *p,
                    rho: *rho,
                    prediction,
                    mc_normalized_slope: fit.as_ref().map(|f| f.normalized_slope),
                    mc_r2: fit.as_ref().map(|f| f.r2),
                    records,
                });
            }
            let report = TheoremReport {
                critical_constant: critical_constant(spec, m)?,
                variational,
                rows,
            };
            w.write_json("theorem.json", &report)?;
            w.write_bytes(
                "theorem.csv",
                csv(
                    &["p", "rho", "prediction", "mc_normalized_slope", "mc_r2", "t_p_at_1"],
                    report.rows.iter().map(|r| {
                        vec![
                            r.p,
                            r.rho,
                            r.prediction,
                            r.mc_normalized_slope.unwrap_or(f64::NAN),
                            r.mc_r2.unwrap_or(f64::NAN),
                            t_p(spec, 1.0, r.p, r.rho),
                        ]
                    }),
                )
                .as_bytes(),
            )?;
            let all: Vec<EstimateRecord> = report.rows.iter().flat_map(|r| r.records.iter().cloned()).collect();
            if !all.is_empty() {
                write_records(w, &all)?;
            }
            Ok(format!("M = {m:.8}, critical constant {:.6}", report.critical_constant))
        }
    }
}
