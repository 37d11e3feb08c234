//! Property tests for the coordinate-descent solver.

use mmm_core::{fit_multiresponse, kkt_max_excess, solve_elastic_net, SolverOptions};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_problem(seed: u64, n: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let response = Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0));
    (design, response)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Permuting design columns permutes coefficients identically.
    #[test]
    fn permutation_equivariance(seed in 0u64..1000, l1 in 0.0f64..2.0, l2 in 0.0f64..2.0) {
        let (design, response) = random_problem(seed, 30, 6);
        let opts = SolverOptions::default().with_tolerance(1e-11);
        let base = solve_elastic_net(design.view(), response.view(), l1, l2, &opts).unwrap();

        // a fixed nontrivial permutation
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut permuted = Array2::<f64>::zeros((30, 6));
        for (dst, &src) in perm.iter().enumerate() {
            permuted.column_mut(dst).assign(&design.column(src));
        }
        let shuffled = solve_elastic_net(permuted.view(), response.view(), l1, l2, &opts).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            let diff = (shuffled.coefficients[dst] - base.coefficients[src]).abs();
            prop_assert!(diff <= 1e-8, "coefficient moved under permutation by {diff}");
        }
    }

    /// At l1 = 0 the solution matches the ridge normal equations.
    #[test]
    fn ridge_equivalence(seed in 0u64..1000, l2 in 0.01f64..20.0) {
        let (design, response) = random_problem(seed, 40, 7);
        let opts = SolverOptions::default().with_tolerance(1e-13);
        let report = solve_elastic_net(design.view(), response.view(), 0.0, l2, &opts).unwrap();
        let mut gram = design.t().dot(&design);
        for j in 0..7 {
            gram[(j, j)] += l2;
        }
        let rhs = design.t().dot(&response);
        let direct = mmm_core::linalg::solve_spd(&gram.view(), &rhs.view()).unwrap();
        for j in 0..7 {
            prop_assert!((report.coefficients[j] - direct[j]).abs() <= 1e-8);
        }
    }

    /// Every converged solve carries a valid stationarity certificate.
    #[test]
    fn converged_solves_satisfy_kkt(seed in 0u64..1000, l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
        let (design, response) = random_problem(seed, 35, 5);
        let opts = SolverOptions::default().with_tolerance(1e-10);
        let report = solve_elastic_net(design.view(), response.view(), l1, l2, &opts).unwrap();
        let excess = kkt_max_excess(
            &design.view(),
            &response.view(),
            l1,
            l2,
            &opts,
            &report.coefficients,
        )
        .unwrap();
        prop_assert!(excess <= 0.0, "KKT excess {excess} > 0 on a converged solve");
    }
}

#[test]
fn warm_start_reaches_same_solution() {
    let (design, response) = random_problem(99, 50, 8);
    let cold_opts = SolverOptions::default().with_tolerance(1e-12);
    let cold = solve_elastic_net(design.view(), response.view(), 0.4, 0.7, &cold_opts).unwrap();
    let warm_opts = SolverOptions {
        warm_start: Some(cold.coefficients.clone()),
        tolerance: 1e-12,
        ..SolverOptions::default()
    };
    let warm = solve_elastic_net(design.view(), response.view(), 0.4, 0.7, &warm_opts).unwrap();
    assert!(
        warm.iterations <= 2,
        "warm start from the solution should stop immediately"
    );
    for (a, b) in warm.coefficients.iter().zip(cold.coefficients.iter()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn multiresponse_scheduling_independence() {
    // identical inputs twice: byte-identical output regardless of how
    // columns were scheduled
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let design = Array2::from_shape_fn((60, 9), |_| rng.gen_range(-1.0..1.0));
    let responses = Array2::from_shape_fn((60, 12), |_| rng.gen_range(-1.0..1.0));
    let opts = SolverOptions::default();
    let (a, _) = fit_multiresponse(design.view(), responses.view(), 0.3, 0.5, &opts).unwrap();
    let (b, _) = fit_multiresponse(design.view(), responses.view(), 0.3, 0.5, &opts).unwrap();
    assert_eq!(a, b);
}
