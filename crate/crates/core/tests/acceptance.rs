//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path as FsPath;
use std::time::Instant;

use fpam_core::functionals::{expected_h, scaling_witness};
use fpam_core::kernels::{compute_constants, verify_identities};
use fpam_core::montecarlo::{
    exp_moment, exp_moment_sweep, fk_limit_mc, hamiltonian_samples, moment_u_rho, variational_lower_bound_mc,
    FkConfig, LatticeEntry, LatticeFunction,
};
use fpam_core::reporting::{run_experiment, RunConfig};
use fpam_core::spectral::{lambda_m, lambda_time_integral, parseval_check, EigenOptions, EigenSolver};
use fpam_core::stats::{ks_two_sample, mean_stderr};
use fpam_core::variational::{maximize_m, VariationalOptions, VariationalProblem};
use fpam_core::{ExperimentConfig, NoiseSpec, QuadratureRule, SpaceTimeField, TorusField, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn experiment(spec: NoiseSpec, p: f64, rho: f64, n_replicas: usize, n_steps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        spec,
        p,
        rho,
        t_grid: vec![1.0],
        n_replicas,
        n_steps,
        master_seed: seed,
        rule: QuadratureRule::default(),
    }
}

fn kernel_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for beta0 in [0.2, 0.5, 0.8] {
        let specs = [
            NoiseSpec::riesz(1.5, beta0, 0.3, 1),
            NoiseSpec::riesz(1.5, beta0, 0.6, 2),
            NoiseSpec::product(1.5, beta0, vec![0.3]),
            NoiseSpec::product(1.5, beta0, vec![0.3, 0.4]),
        ];
        for spec in specs {
            let spec = spec.map_err(|e| e.to_string())?;
            let c = compute_constants(&spec, 1e-8).map_err(|e| e.to_string())?;
            let checks = verify_identities(&spec, &c, 1e-8).map_err(|e| e.to_string())?;
            for name in ["temporal-decomposition", "spatial-decomposition"] {
                let n = checks.iter().filter(|c| c.name == name).count();
                if n < 5 {
                    return Err(format!("{name}: only {n} probes for {spec:?}"));
                }
            }
            for c in &checks {
                worst = worst.max(c.rel_err);
                if c.rel_err > 1e-4 {
                    return Err(format!("{} at {:?}: rel err {:e} for {spec:?}", c.name, c.probe, c.rel_err));
                }
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} kernels, worst relative error {worst:.2e}"))
}

fn closed_form_mean() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (alpha, beta0, beta, d) in [(2.0, 0.0, 1.0, 3), (1.5, 0.2, 0.3, 1), (1.0, 0.0, 0.4, 1)] {
        let spec = NoiseSpec::riesz(alpha, beta0, beta, d).map_err(|e| e.to_string())?;
        let cfg = experiment(spec.clone(), 1.0, 0.0, 10_000, 32, 101);
        let h = hamiltonian_samples(&cfg, 1.0).map_err(|e| e.to_string())?;
        let (m, se) = mean_stderr(&h);
        let exact = expected_h(&spec, 1.0).map_err(|e| e.to_string())?;
        let z = (m - exact) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("({alpha},{beta0},{beta},{d}) z={z:+.2}"));
    }
    let s = parts.join("; ");
    check(ok, s.clone(), s)
}

fn distributional_scaling() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (alpha, beta0, beta, d) in [(1.5, 0.2, 0.3, 1), (2.0, 0.0, 1.0, 2)] {
        let spec = NoiseSpec::riesz(alpha, beta0, beta, d).map_err(|e| e.to_string())?;
        let w = scaling_witness(&spec, 1.0, 2.0, 10_000, 32, QuadratureRule::default(), 202).map_err(|e| e.to_string())?;
        let ks = ks_two_sample(&w.scaled_horizon, &w.rescaled);
        ok &= ks.p_value > 0.01;
        parts.push(format!("({alpha},{beta0},{beta},{d}) D={:.4} p={:.3}", ks.statistic, ks.p_value));
    }
    let s = parts.join("; ");
    check(ok, s.clone(), s)
}

fn random_field(grid: TorusGrid, rng: &mut ChaCha12Rng) -> TorusField {
    let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    TorusField::from_values(grid, v).unwrap()
}

fn parseval() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        let grid = TorusGrid::new(3.0, 16, dim).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let f = random_field(grid, &mut rng);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(0..16) as f64 / 16.0).collect();
            let (a, b) = parseval_check(&f, &y).map_err(|e| e.to_string())?;
            let rel = if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
            worst = worst.max(rel);
        }
    }
    check(worst <= 1e-10, format!("worst relative error {worst:.2e}"), format!("relative error {worst:e}"))
}

fn lambda_exactness() -> Outcome {
    let grid = TorusGrid::new(2.0, 16, 2).map_err(|e| e.to_string())?;
    let c = 0.7;
    let constant = TorusField::from_values(grid, vec![c; grid.len()]).map_err(|e| e.to_string())?;
    let dense = EigenOptions {
        solver: EigenSolver::Dense,
        ..Default::default()
    };
    let lanczos = EigenOptions {
        solver: EigenSolver::Lanczos,
        ..Default::default()
    };
    for o in [&dense, &lanczos] {
        let l = lambda_m(&constant, 1.3, 4, o).map_err(|e| e.to_string())?.lambda;
        if (l - c).abs() > 1e-10 {
            return Err(format!("constant potential: {l} vs {c}"));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let f = random_field(grid, &mut rng);
    let base = lambda_m(&f, 1.3, 4, &dense).map_err(|e| e.to_string())?.lambda;
    let shifted = lambda_m(&f.shifted(2.5).unwrap(), 1.3, 4, &dense).map_err(|e| e.to_string())?.lambda;
    if (shifted - base - 2.5).abs() > 1e-8 {
        return Err(format!("shift: {shifted} vs {}", base + 2.5));
    }
    let mut prev = f64::NEG_INFINITY;
    let mut sweep = Vec::new();
    for k in [1, 2, 3, 4, 6, 8] {
        let l = lambda_m(&f, 1.3, k, &EigenOptions::default()).map_err(|e| e.to_string())?.lambda;
        if l < prev - 1e-8 {
            return Err(format!("truncation {k}: {l} < {prev}"));
        }
        prev = l;
        sweep.push(format!("{l:.6}"));
    }
    Ok(format!("constant exact, shift exact, truncation sweep [{}]", sweep.join(", ")))
}

fn feynman_kac() -> Outcome {
    let grid = TorusGrid::new(1.0, 128, 1).map_err(|e| e.to_string())?;
    let slices: Vec<TorusField> = (0..17)
        .map(|i| {
            let s = i as f64 / 16.0;
            TorusField::from_fn(grid, |x| (1.0 + 0.5 * s) * ((2.0 * PI * x[0]).cos() - 1.0).exp()).unwrap()
        })
        .collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for alpha in [1.0, 2.0] {
        let cfg = FkConfig {
            alpha,
            t: 50.0,
            n_replicas: 10_000,
            n_steps: 5000,
            master_seed: 606,
        };
        let spectral = lambda_time_integral(&slices, alpha, 16, &EigenOptions::default()).map_err(|e| e.to_string())?;
        let r = fk_limit_mc(&slices, &cfg).map_err(|e| e.to_string())?;
        let diff = (r.point_estimate - spectral).abs();
        let budget = 3.0 * r.stderr + 0.5 / cfg.t;
        ok &= diff <= budget;
        parts.push(format!(
            "α={alpha}: mc {:.5}±{:.1e} vs λ {spectral:.5} (|Δ|={diff:.1e} ≤ {budget:.1e})",
            r.point_estimate, r.stderr
        ));
    }
    let s = parts.join("; ");
    check(ok, s.clone(), s)
}

fn variational_scaling() -> Outcome {
    let grid = TorusGrid::new(16.0, 512, 1).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for beta0 in [0.0, 0.3] {
        let spec = NoiseSpec::riesz(1.5, beta0, 0.4, 1).map_err(|e| e.to_string())?;
        let m = |theta: f64| {
            let opts = VariationalOptions {
                theta,
                ..Default::default()
            };
            maximize_m(&spec, grid, 16, &opts).map(|r| r.m_estimate)
        };
        let base = m(1.0).map_err(|e| e.to_string())?;
        for theta in [0.5, 2.0] {
            let ratio = m(theta).map_err(|e| e.to_string())? / base;
            let pred = theta.powf(1.5 / 1.1);
            let rel = (ratio / pred - 1.0).abs();
            ok &= rel <= 0.02;
            parts.push(format!("β0={beta0} θ={theta}: {ratio:.5}/{pred:.5}"));
        }
    }
    let s = parts.join("; ");
    check(ok, s.clone(), s)
}

fn degenerate_optimum() -> Outcome {
    let spec = NoiseSpec::riesz(1.5, 0.0, 0.0, 1).map_err(|e| e.to_string())?;
    let grid = TorusGrid::new(8.0, 64, 1).map_err(|e| e.to_string())?;
    let r = maximize_m(&spec, grid, 4, &VariationalOptions::default()).map_err(|e| e.to_string())?;
    let err = (r.m_estimate - 0.5).abs();
    check(err <= 1e-6, format!("M = {:.10}", r.m_estimate), format!("M = {} (error {err:e})", r.m_estimate))
}

fn gradient_check() -> Outcome {
    let spec = NoiseSpec::riesz(1.5, 0.3, 0.5, 2).map_err(|e| e.to_string())?;
    let grid = TorusGrid::new(6.0, 16, 2).map_err(|e| e.to_string())?;
    let n_t = 4;
    let p = VariationalProblem::new(&spec, grid, n_t, 1.0).map_err(|e| e.to_string())?;
    let g = p.random_start(9, 0).map_err(|e| e.to_string())?;
    let grad = p.gradient(&g).map_err(|e| e.to_string())?;
    let len = grid.len();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        // tangent direction: remove the radial part slice by slice
        let mut v: Vec<f64> = (0..g.values().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for i in 0..n_t {
            let gs = g.slice(i);
            let vs = &mut v[i * len..(i + 1) * len];
            let c = gs.iter().zip(vs.iter()).map(|(a, b)| a * b).sum::<f64>() / gs.iter().map(|a| a * a).sum::<f64>();
            for (b, a) in vs.iter_mut().zip(gs) {
                *b -= c * a;
            }
        }
        let at = |s: f64| {
            let vals: Vec<f64> = g.values().iter().zip(&v).map(|(a, b)| a + s * b).collect();
            p.functional_eval(&SpaceTimeField::normalized(grid, n_t, vals).unwrap()).unwrap()
        };
        let fd = (at(eps) - at(-eps)) / (2.0 * eps);
        let an: f64 = grad.iter().zip(&v).map(|(a, b)| a * b).sum();
        worst = worst.max(((fd - an) / an).abs());
    }
    check(worst <= 1e-5, format!("worst relative error {worst:.2e}"), format!("relative error {worst:e}"))
}

fn lower_bound() -> Outcome {
    let spec = NoiseSpec::riesz(1.5, 0.2, 0.3, 1).map_err(|e| e.to_string())?;
    let h = LatticeFunction {
        dtau: 1.0,
        dxi: 0.5,
        entries: vec![
            LatticeEntry { tau: 0, xi: vec![0], re: 0.6, im: 0.0 },
            LatticeEntry { tau: 1, xi: vec![1], re: 0.3, im: 0.2 },
            LatticeEntry { tau: -1, xi: vec![-1], re: 0.3, im: -0.2 },
        ],
    };
    let mut parts = Vec::new();
    let mut ok = true;
    for t in [0.5, 1.0] {
        let cfg = experiment(spec.clone(), 2.0, 1.0, 10_000, 32, 1010);
        let lb = variational_lower_bound_mc(&h, &cfg, t).map_err(|e| e.to_string())?;
        let mo = moment_u_rho(&cfg, t).map_err(|e| e.to_string())?;
        let root = mo.point_estimate.sqrt();
        let root_se = 0.5 * root * mo.stderr / mo.point_estimate;
        let combined = (lb.stderr.powi(2) + root_se.powi(2)).sqrt();
        ok &= lb.point_estimate <= root + 3.0 * combined;
        parts.push(format!("t={t}: bound {:.5} vs ‖u‖₂ {root:.5}", lb.point_estimate));
    }
    let s = parts.join("; ");
    check(ok, s.clone(), s)
}

fn small_theta() -> Outcome {
    let spec = NoiseSpec::riesz(1.5, 0.2, 0.3, 1).map_err(|e| e.to_string())?;
    let cfg = experiment(spec.clone(), 1.0, 0.0, 10_000, 32, 1111);
    let theta = 1e-3;
    let r = exp_moment(&cfg, theta, 1.0).map_err(|e| e.to_string())?;
    let target = theta * expected_h(&spec, 1.0).map_err(|e| e.to_string())?;
    let z = (r.log_estimate - target) / r.log_stderr;
    if z.abs() > 3.0 {
        return Err(format!("log estimate {} vs {target} (z = {z:.2})", r.log_estimate));
    }
    let thetas = [0.001, 0.01, 0.05, 0.1, 0.2, 0.4, 0.8];
    let sweep = exp_moment_sweep(&cfg, &thetas, 1.0).map_err(|e| e.to_string())?;
    let ys: Vec<f64> = sweep.iter().map(|r| r.log_estimate).collect();
    for i in 1..thetas.len() - 1 {
        let left = (ys[i] - ys[i - 1]) / (thetas[i] - thetas[i - 1]);
        let right = (ys[i + 1] - ys[i]) / (thetas[i + 1] - thetas[i]);
        if right < left - 1e-12 {
            return Err(format!("not convex at θ = {}", thetas[i]));
        }
    }
    Ok(format!("z = {z:+.2}, sweep convex over {} θ values", thetas.len()))
}

fn reproducibility() -> Outcome {
    let configs = [
        r#"{"pipeline":"exp-moment","thetas":[0.1,0.5],"experiment":{"spec":{"alpha":1.5,"beta0":0.2,"kernel":{"type":"riesz","beta":0.3},"dim":1},
            "p":1,"rho":0,"t_grid":[0.5,1.0],"n_replicas":500,"n_steps":16,"master_seed":12}}"#,
        r#"{"pipeline":"moment","experiment":{"spec":{"alpha":1.2,"beta0":0.5,"kernel":{"type":"product","betas":[0.3,0.2]},"dim":2},
            "p":3,"rho":1,"t_grid":[0.5],"n_replicas":300,"n_steps":16,"master_seed":12}}"#,
        r#"{"pipeline":"fk-check","field":{"type":"bump","period":1,"n":32,"dim":1,"amplitude":1,"width":0.2,"slices":3},
            "fk":{"alpha":1.5,"t":5,"n_replicas":500,"n_steps":200,"master_seed":12},"k_trunc":8}"#,
    ];
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for json in configs {
        let cfg = RunConfig::from_json(json).map_err(|e| e.to_string())?;
        let ea = run_experiment(&cfg, a.path(), FsPath::new(".")).map_err(|e| e.to_string())?.entry;
        let eb = run_experiment(&cfg, b.path(), FsPath::new(".")).map_err(|e| e.to_string())?.entry;
        for (oa, ob) in ea.outputs.iter().zip(&eb.outputs) {
            let (x, y) = (std::fs::read(a.path().join(&oa.path)), std::fs::read(b.path().join(&ob.path)));
            if x.map_err(|e| e.to_string())? != y.map_err(|e| e.to_string())? || oa.sha256 != ob.sha256 {
                return Err(format!("{} differs between runs", oa.path));
            }
            files += 1;
        }
    }
    Ok(format!("{files} output files byte-identical across runs"))
}

fn main() {
    let checks: [Check; 12] = [
        ("kernel identities", kernel_identities),
        ("closed-form mean of H", closed_form_mean),
        ("distributional scaling of H", distributional_scaling),
        ("Parseval identities", parseval),
        ("eigenvalue exactness", lambda_exactness),
        ("Feynman-Kac vs eigenvalue", feynman_kac),
        ("variational scaling law", variational_scaling),
        ("degenerate optimum", degenerate_optimum),
        ("gradient vs finite differences", gradient_check),
        ("lower bound below moment", lower_bound),
        ("small-theta exponential moments", small_theta),
        ("reproducibility", reproducibility),
    ];
    let only: Vec<usize> = std::env::var("FPAM_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, f)) in checks.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
