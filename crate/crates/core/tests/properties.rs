use proptest::prelude::*;
use rand::Rng;
use rcn_core::fixtures::{decoupled_padding, padded, random_stable};
use rcn_core::numerics::{numerical_rank, orthonormal_basis, ridge_solve, spectral_norm};
use rcn_core::realization::{
    markov_deviation, project_controllable, project_observable, random_stable_realization, simulate,
};
use rcn_core::reservoir::{from_linear_realization, random_reservoir};
use rcn_core::rng::substream;
use rcn_core::{
    reduce, Activation, Matrix, RankTolerance, ReservoirSpec, StateModel, TimeSeries, Vector,
};

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Linear),
        Just(Activation::Tanh),
        Just(Activation::Sigmoid)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_keeps_impulse_response(d in 1usize..6, k in 1usize..5, seed in 0u64..10_000) {
        let minimal = random_stable(d, 1, 1, 0.7, seed);
        let system = padded(&minimal, k.div_ceil(2), k / 2, seed + 1);
        let tol = RankTolerance::default();
        let (reduced, trace) = reduce(&system, tol).unwrap();
        prop_assert!(reduced.dim <= system.dim);
        prop_assert_eq!(trace.final_dim, reduced.dim);
        prop_assert!(markov_deviation(&system, &reduced, 2 * system.dim).unwrap() < 1e-8);
        prop_assert!(spectral_norm(&reduced.a) <= spectral_norm(&system.a) + 1e-10);
    }

    #[test]
    fn reduction_is_idempotent(d in 1usize..6, extra in 0usize..4, seed in 0u64..10_000) {
        let system = decoupled_padding(&random_stable(d, 2, 2, 0.6, seed), extra, seed);
        let tol = RankTolerance::default();
        let (once, _) = reduce(&system, tol).unwrap();
        let (twice, trace) = reduce(&once, tol).unwrap();
        prop_assert!(trace.iterations.is_empty());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn projections_never_increase_norm(n in 2usize..8, seed in 0u64..10_000, norm in 0.05f64..1.2) {
        let r = padded(&random_stable(n, 1, 1, norm, seed), 1, 1, seed);
        let tol = RankTolerance::default();
        let base = spectral_norm(&r.a);
        prop_assert!(spectral_norm(&project_controllable(&r, tol).unwrap().a) <= base + 1e-10);
        prop_assert!(spectral_norm(&project_observable(&r, tol).unwrap().a) <= base + 1e-10);
    }

    #[test]
    fn reduced_system_matches_padded_output(d in 1usize..5, seed in 0u64..10_000) {
        let system = padded(&random_stable(d, 1, 1, 0.8, seed), 2, 1, seed);
        let (reduced, _) = reduce(&system, RankTolerance::default()).unwrap();
        let mut rng = substream(seed, 3);
        let u = TimeSeries::scalar((0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y1 = simulate(&system, &u, None).unwrap();
        let y2 = simulate(&reduced, &u, None).unwrap();
        let scale = y1.values().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        for (a, b) in y1.values().iter().zip(y2.values()) {
            prop_assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn echo_state_contraction(
        act in activation(),
        alpha in 0.05f64..1.0,
        norm in 0.1f64..0.99,
        seed in 0u64..10_000,
    ) {
        let net = random_reservoir(
            &ReservoirSpec { n: 15, input_dim: 1, sparsity: 0.3, target_norm: norm, leakage: alpha.min(0.999), activation: act },
            seed,
        )
        .unwrap();
        let rate = (1.0 - net.leakage) + net.leakage * act.lipschitz_constant() * norm;
        let mut rng = substream(seed, 9);
        let mut x1 = Vector::from_fn(15, |_, _| rng.random_range(-2.0..2.0));
        let mut x2 = Vector::from_fn(15, |_, _| rng.random_range(-2.0..2.0));
        let d0 = (&x1 - &x2).norm();
        for k in 1..=50 {
            let u = [rng.random_range(-1.0..1.0)];
            x1 = net.advance(&x1, &u);
            x2 = net.advance(&x2, &u);
            prop_assert!((&x1 - &x2).norm() <= rate.powi(k) * d0 * (1.0 + 1e-9) + 1e-13);
        }
    }

    #[test]
    fn seeded_rcn_inherits_stability(n in 1usize..10, alpha in 0.55f64..0.99, seed in 0u64..10_000) {
        let r = random_stable_realization(n, 1, 1, 2.0 * alpha - 1.0, &mut substream(seed, 0)).unwrap();
        prop_assert!(spectral_norm(&r.a) <= 2.0 * alpha - 1.0 + 1e-12);
        let net = from_linear_realization(&r, alpha, Activation::Linear).unwrap();
        prop_assert!(net.esp_margin() > 0.0);
        let (a, b) = net.linear_system();
        prop_assert!((a - &r.a).norm() <= 1e-12 * (1.0 + r.a.norm()));
        prop_assert!((b - &r.b).norm() <= 1e-12 * (1.0 + r.b.norm()));
    }

    #[test]
    fn ridge_matches_normal_equations(rows in 12usize..40, cols in 1usize..8, lambda in 1e-6f64..1.0, seed in 0u64..10_000) {
        let mut rng = substream(seed, 4);
        let x = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let y = Matrix::from_fn(rows, 2, |_, _| rng.random_range(-1.0..1.0));
        let w = ridge_solve(&x, &y, lambda).unwrap();
        let lhs = x.transpose() * &x + Matrix::identity(cols, cols) * lambda;
        let oracle = lhs.cholesky().unwrap().solve(&(x.transpose() * &y));
        prop_assert!((&w - &oracle).norm() <= 1e-8 * oracle.norm().max(1e-300));
    }

    #[test]
    fn basis_spans_column_space(rows in 2usize..12, rank in 1usize..5, cols in 1usize..10, seed in 0u64..10_000) {
        let rank = rank.min(rows).min(cols);
        let mut rng = substream(seed, 5);
        let m = Matrix::from_fn(rows, rank, |_, _| rng.random_range(-1.0..1.0))
            * Matrix::from_fn(rank, cols, |_, _| rng.random_range(-1.0..1.0));
        let tol = RankTolerance::default();
        let q = orthonormal_basis(&m, tol).unwrap();
        prop_assert_eq!(q.ncols(), numerical_rank(&m, tol));
        prop_assert!((q.transpose() * &q - Matrix::identity(q.ncols(), q.ncols())).norm() < 1e-10);
        prop_assert!((&q * q.transpose() * &m - &m).norm() <= 1e-10 * m.norm());
    }
}
