use fpam_core::functionals::{cell_pair_weight, n_moment_exponent, time_square_integral, HamiltonianEvaluator};
use fpam_core::kernels::dalang_check;
use fpam_core::spectral::{dirichlet_form_torus, lambda_m, EigenOptions, EigenSolver, FormConvention};
use fpam_core::stable::{sample_path, wrap};
use fpam_core::stats::log_mean_exp;
use fpam_core::variational::{critical_constant, lyapunov_prediction, VariationalProblem};
use fpam_core::{NoiseSpec, PathSpec, QuadratureRule, Regime, SpaceTimeField, TorusField, TorusGrid};
use proptest::prelude::*;

fn riesz_spec() -> impl Strategy<Value = NoiseSpec> {
    (0.3f64..2.0, 0.0f64..0.9, 1usize..=3).prop_flat_map(|(alpha, beta0, dim)| {
        (0.0..(dim as f64).min(2.0) * 0.95).prop_map(move |beta| NoiseSpec::riesz(alpha, beta0, beta, dim).unwrap())
    })
}

fn full_spec_1d() -> impl Strategy<Value = NoiseSpec> {
    (1.0f64..2.0, 0.0f64..0.4).prop_flat_map(|(alpha, beta0)| {
        let cap = (alpha * (1.0 - beta0)).min(0.95);
        (0.05..cap).prop_map(move |beta| NoiseSpec::riesz(alpha, beta0, beta, 1).unwrap())
    })
}

fn field_1d(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regime_matches_dalang_conditions(spec in riesz_spec()) {
        let (a, b, b0) = (spec.alpha, spec.beta(), spec.beta0);
        let r = dalang_check(&spec);
        prop_assert_eq!(r, spec.regime());
        let expected = if a * b0 + b < a { Regime::Full } else if b < a { Regime::SkorohodOnly } else { Regime::NotSolvable };
        prop_assert_eq!(r, expected);
    }

    #[test]
    fn kernel_is_homogeneous(spec in riesz_spec(), c in 0.1f64..10.0, x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let x = &x[..spec.dim];
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let lhs = spec.gamma_eval(&scaled);
        let rhs = c.powf(-spec.beta()) * spec.gamma_eval(x);
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_kernel_is_homogeneous(b1 in 0.0f64..0.9, b2 in 0.0f64..0.9, c in 0.1f64..10.0, x in 0.1f64..3.0, y in -3.0f64..-0.1) {
        let spec = NoiseSpec::product(1.5, 0.1, vec![b1, b2]).unwrap();
        let lhs = spec.gamma_eval(&[c * x, c * y]);
        let rhs = c.powf(-(b1 + b2)) * spec.gamma_eval(&[x, y]);
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_weights_tile_the_square(n in 1usize..30, b in 0.0f64..0.95) {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += cell_pair_weight(i.abs_diff(j), b);
            }
        }
        let exact = time_square_integral(n as f64, b);
        prop_assert!((s / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moment_exponent_ignores_path_order(spec in full_spec_1d(), seed in 0u64..1000, rho in 0.0f64..1.0) {
        let ps = |s| PathSpec { dim: 1, alpha: spec.alpha, horizon: 1.0, n_steps: 12, seed: s };
        let paths: Vec<_> = (0..3).map(|k| sample_path(&ps(seed * 3 + k)).unwrap()).collect();
        let e = HamiltonianEvaluator::new(&spec, QuadratureRule::default(), 12, 1.0).unwrap();
        let a = n_moment_exponent(&paths, &e, rho).unwrap();
        let rev: Vec<_> = paths.iter().rev().cloned().collect();
        let b = n_moment_exponent(&rev, &e, rho).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let h01 = e.cross_pair(&paths[0], &paths[1]).unwrap().h;
        let h10 = e.cross_pair(&paths[1], &paths[0]).unwrap().h;
        prop_assert_eq!(h01, h10);
        prop_assert!(h01 > 0.0);
    }

    #[test]
    fn wrap_lands_in_the_box(x in -1e6f64..1e6, m in 0.1f64..100.0) {
        let w = wrap(x, m);
        prop_assert!((0.0..m).contains(&w));
        let k = ((x - w) / m).round();
        prop_assert!((x - w - k * m).abs() < 1e-6 * x.abs().max(1.0));
    }

    #[test]
    fn log_mean_exp_is_shift_equivariant(xs in prop::collection::vec(-50.0f64..50.0, 1..40), c in -100.0f64..100.0) {
        let a = log_mean_exp(&xs).unwrap().log_mean;
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let b = log_mean_exp(&shifted).unwrap().log_mean;
        prop_assert!((b - a - c).abs() < 1e-9);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!(a <= max + 1e-12 && a >= mean - 1e-12);
    }

    #[test]
    fn dirichlet_form_is_translation_invariant(v in field_1d(16), shift in 0usize..16, alpha in 0.3f64..2.0) {
        let grid = TorusGrid::new(2.0, 16, 1).unwrap();
        let f = TorusField::from_values(grid, v.clone()).unwrap();
        let rolled: Vec<f64> = (0..16).map(|i| v[(i + shift) % 16]).collect();
        let g = TorusField::from_values(grid, rolled).unwrap();
        let (a, b) = (
            dirichlet_form_torus(&f, alpha, FormConvention::Process),
            dirichlet_form_torus(&g, alpha, FormConvention::Process),
        );
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12));
    }

    #[test]
    fn eigenvalue_bounds_and_shift(v in field_1d(16), c in -3.0f64..3.0, alpha in 0.5f64..2.0) {
        let grid = TorusGrid::new(1.0, 16, 1).unwrap();
        let f = TorusField::from_values(grid, v).unwrap();
        let opts = EigenOptions { solver: EigenSolver::Dense, ..Default::default() };
        let l = lambda_m(&f, alpha, 6, &opts).unwrap().lambda;
        let max = f.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(l >= f.mean() - 1e-10);
        prop_assert!(l <= max + 1e-10);
        let ls = lambda_m(&f.shifted(c).unwrap(), alpha, 6, &opts).unwrap().lambda;
        prop_assert!((ls - l - c).abs() < 1e-9);
        let coarse = lambda_m(&f, alpha, 3, &opts).unwrap().lambda;
        prop_assert!(coarse <= l + 1e-10);
    }

    #[test]
    fn normalization_is_exact(v in prop::collection::vec(0.01f64..2.0, 32)) {
        let grid = TorusGrid::new(4.0, 16, 1).unwrap();
        let g = SpaceTimeField::normalized(grid, 2, v).unwrap();
        for n in g.slice_norms() {
            prop_assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_is_translation_invariant(v in prop::collection::vec(0.01f64..2.0, 32), shift in 0usize..16) {
        let spec = NoiseSpec::riesz(1.5, 0.3, 0.4, 1).unwrap();
        let grid = TorusGrid::new(4.0, 16, 1).unwrap();
        let p = VariationalProblem::new(&spec, grid, 2, 1.0).unwrap();
        let g = SpaceTimeField::normalized(grid, 2, v).unwrap();
        let a = p.functional_eval(&g).unwrap();
        let b = p.functional_eval(&g.translated(&[shift])).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn prediction_per_p_increases(spec in full_spec_1d(), p in 2.0f64..10.0, dp in 0.01f64..3.0, rho in 0.0f64..1.0, m in 0.1f64..5.0) {
        let a = lyapunov_prediction(&spec, p, rho, m).unwrap() / p;
        let b = lyapunov_prediction(&spec, p + dp, rho, m).unwrap() / (p + dp);
        prop_assert!(b > a);
    }

    #[test]
    fn critical_constant_follows_noise_scaling(spec in full_spec_1d(), theta in 0.1f64..10.0, m in 0.1f64..5.0) {
        let (a, b) = (spec.alpha, spec.beta());
        let scaled_m = theta.powf(a / (a - b)) * m;
        let lhs = critical_constant(&spec, scaled_m).unwrap();
        let rhs = theta.powf(-a / b) * critical_constant(&spec, m).unwrap();
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-10);
    }
}
