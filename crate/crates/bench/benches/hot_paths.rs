use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fpam_bench::{bump, paths, spec_1d, spec_2d};
use fpam_core::functionals::HamiltonianEvaluator;
use fpam_core::spectral::{lambda_m, EigenOptions, EigenSolver};
use fpam_core::stable::sample_path;
use fpam_core::variational::VariationalProblem;
use fpam_core::{PathSpec, QuadratureRule, TorusGrid};
use std::hint::black_box;

fn stable_paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_path");
    for n_steps in [256, 4096] {
        g.bench_with_input(BenchmarkId::from_parameter(n_steps), &n_steps, |b, &n| {
            let spec = PathSpec { dim: 2, alpha: 1.3, horizon: 1.0, n_steps: n, seed: 1 };
            b.iter(|| sample_path(black_box(&spec)).unwrap())
        });
    }
    g.finish();
}

fn hamiltonian(c: &mut Criterion) {
    let mut g = c.benchmark_group("hamiltonian");
    for (label, spec) in [("d1", spec_1d()), ("d2", spec_2d())] {
        for n_steps in [32, 128] {
            let ps = paths(&spec, n_steps, 2);
            let eval = HamiltonianEvaluator::new(&spec, QuadratureRule::default(), n_steps, 1.0).unwrap();
            g.bench_function(format!("self_{label}_{n_steps}"), |b| b.iter(|| eval.self_pair(black_box(&ps[0])).unwrap()));
            g.bench_function(format!("cross_{label}_{n_steps}"), |b| {
                b.iter(|| eval.cross_pair(black_box(&ps[0]), black_box(&ps[1])).unwrap())
            });
        }
    }
    g.finish();
}

fn eigenvalue(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda_m");
    g.sample_size(10);
    let f1 = bump(128, 1);
    let f2 = bump(32, 2);
    for (solver, name) in [(EigenSolver::Dense, "dense"), (EigenSolver::Lanczos, "lanczos")] {
        let opts = EigenOptions { solver, ..Default::default() };
        g.bench_function(format!("{name}_d1_k32"), |b| b.iter(|| lambda_m(&f1, 1.5, 32, &opts).unwrap()));
        g.bench_function(format!("{name}_d2_k8"), |b| b.iter(|| lambda_m(&f2, 1.5, 8, &opts).unwrap()));
    }
    g.finish();
}

fn variational(c: &mut Criterion) {
    let mut g = c.benchmark_group("variational");
    let spec = spec_1d();
    for (n, n_t) in [(128, 8), (512, 16)] {
        let grid = TorusGrid::new(16.0, n, 1).unwrap();
        let p = VariationalProblem::new(&spec, grid, n_t, 1.0).unwrap();
        let field = p.random_start(0, 0).unwrap();
        g.bench_function(format!("functional_{n}x{n_t}"), |b| b.iter(|| p.functional_eval(black_box(&field)).unwrap()));
        g.bench_function(format!("gradient_{n}x{n_t}"), |b| b.iter(|| p.gradient(black_box(&field)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, stable_paths, hamiltonian, eigenvalue, variational);
criterion_main!(benches);
