use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use netnewton::analysis::{constants, relative_error};
use netnewton::objectives::make_quadratic;
use netnewton::penalty::{PenalizedProblem, StackedVector};
use netnewton::solver::{Method, Simulator};
use netnewton::topology::{build_d_regular_cycle, build_lazy_cycle_weights, validate_weights};

fn problem(n: usize, d: usize, p: usize, alpha: f64, seed: u64) -> PenalizedProblem {
    let t = build_d_regular_cycle(n, d).unwrap();
    let w = build_lazy_cycle_weights(&t).unwrap();
    PenalizedProblem::new(t, w, make_quadratic(n, p, 2, seed).unwrap().objectives(), alpha).unwrap()
}

fn cycle_shape() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=9).prop_flat_map(|n| {
        let max_half = (n - 1) / 2;
        (Just(n), (1..=max_half).prop_map(|h| 2 * h))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_dense_series(
        (n, d) in cycle_shape(),
        half_p in 1usize..=2,
        k in 0usize..=5,
        log_alpha in -3.0f64..0.5,
        seed in any::<u64>(),
        entries in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let p = 2 * half_p;
        let pb = problem(n, d, p, 10f64.powf(log_alpha), seed);
        let y = StackedVector::new((0..n).map(|i| DVector::from_fn(p, |r, _| entries[(i * p + r) % entries.len()])).collect()).unwrap();
        let g = pb.gradient(&y).unwrap();
        let local = pb.nn_direction(&y, &g, k).unwrap().to_flat();
        let dense = pb.dense_series_direction(&y, &g, k).unwrap().to_flat();
        assert_abs_diff_eq!(local, dense, epsilon = 1e-10 * (1.0 + dense.amax()));
    }

    #[test]
    fn lazy_cycle_weights_always_valid((n, d) in cycle_shape()) {
        let t = build_d_regular_cycle(n, d).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let report = validate_weights(&w, &t);
        prop_assert!(report.is_valid(), "{}", report.summary());
        assert_abs_diff_eq!(w.delta(), 0.5 + 0.5 / (d as f64 + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn constants_ordering(
        delta in 0.0f64..0.99,
        spread in 0.0f64..0.5,
        m in 1e-4f64..1.0,
        ratio in 1.0f64..1e3,
        log_alpha in -4.0f64..1.0,
        k in 0usize..20,
    ) {
        let big_delta = (delta + spread).min(0.999);
        let rc = constants(delta, big_delta, m, m * ratio, 10f64.powf(log_alpha), k).unwrap();
        prop_assert!(rc.rho > 0.0 && rc.rho < 1.0);
        prop_assert!(rc.lambda > 0.0 && rc.lambda <= rc.big_lambda * (1.0 + 1e-12));
    }

    #[test]
    fn consensus_iterate_has_zero_relative_error(x in prop::collection::vec(-5.0f64..5.0, 4), n in 1usize..10) {
        let x = DVector::from_vec(x);
        prop_assume!(x.norm() > 1e-6);
        prop_assert_eq!(relative_error(&StackedVector::repeat(&x, n), &x).unwrap(), 0.0);
    }

    #[test]
    fn rounds_per_iteration(k in 0usize..10, steps in 1usize..6) {
        let pb = problem(6, 2, 2, 0.1, 3);
        let mut sim = Simulator::new(&pb, None).unwrap();
        for _ in 0..steps {
            sim.step_nn(k, 1.0).unwrap();
        }
        prop_assert_eq!(sim.rounds(), (steps * (k + 1)) as u64);
        prop_assert_eq!(Method::NetworkNewton { k }.rounds_per_iteration(), (k + 1) as u64);
    }
}
