//! Elastic-net penalized least squares by cyclic coordinate descent.
//!
//! The objective keeps a raw residual sum of squares with no 1/n or
//! 1/2 factor:
//!
//! ```text
//! f(b) = ||y - D b||^2 + lambda2 * ||b_P||^2 + lambda1 * ||b_P||_1
//! ```
//!
//! where `P` is the set of penalized columns. The coordinate update for a
//! penalized column j is `b_j <- S(d_j' r_j, lambda1/2) / (d_j' d_j +
//! lambda2)` with `r_j` the partial residual and `S` the soft-threshold
//! operator; unpenalized columns take the plain least-squares update.
//! Columns are visited cyclically in a fixed left-to-right order and the
//! start is the zero vector unless a warm start is given, so the sequence
//! of iterates is fully deterministic.

use crate::error::{Error, Result};
use crate::par;
use ndarray::{Array2, ArrayView1, ArrayView2};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the max absolute coefficient change per
    /// full sweep.
    pub tolerance: f64,
    /// Per-column penalization flags; `None` penalizes every column.
    pub penalty_mask: Option<Vec<bool>>,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 10_000,
            tolerance: 1e-8,
            penalty_mask: None,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Indices of nonzero coefficients.
    pub active_set: Vec<usize>,
    /// Max absolute coefficient change in the final sweep.
    pub last_change: f64,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Columns copied out of the design once per solve; per-column access
/// dominates the inner loop, so contiguous column storage pays for itself
/// immediately.
struct Columns {
    cols: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
}

impl Columns {
    fn from_design(design: &ArrayView2<f64>) -> Columns {
        let cols: Vec<Vec<f64>> = (0..design.ncols())
            .map(|j| design.column(j).to_vec())
            .collect();
        let sq_norms = cols.iter().map(|c| dot(c, c)).collect();
        Columns { cols, sq_norms }
    }
}

fn resolve_mask(mask: &Option<Vec<bool>>, d: usize) -> Result<Vec<bool>> {
    match mask {
        None => Ok(vec![true; d]),
        Some(m) if m.len() == d => Ok(m.clone()),
        Some(m) => Err(Error::DimensionMismatch {
            context: "penalty_mask length must equal design column count".to_string(),
            expected: d,
            got: m.len(),
        }),
    }
}

fn objective(residual: &[f64], coef: &[f64], mask: &[bool], lambda1: f64, lambda2: f64) -> f64 {
    let rss = dot(residual, residual);
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (j, &b) in coef.iter().enumerate() {
        if mask[j] {
            l1 += b.abs();
            l2 += b * b;
        }
    }
    rss + lambda2 * l2 + lambda1 * l1
}

/// Max excess over the allowed slack of the component-wise stationarity
/// conditions, normalized so that any value <= 0 certifies the solution:
///
/// * penalized, b_j != 0: |-2 d_j'r + 2 lambda2 b_j + lambda1 sign(b_j)|
///   must not exceed `10 tol (d_j'd_j + lambda2)`;
/// * penalized, b_j == 0: |2 d_j'r| must not exceed `lambda1 + 10 tol`;
/// * unpenalized: |2 d_j'r| must not exceed `10 tol d_j'd_j`.
pub fn kkt_max_excess(
    design: &ArrayView2<f64>,
    response: &ArrayView1<f64>,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
    coefficients: &[f64],
) -> Result<f64> {
    let d = design.ncols();
    let mask = resolve_mask(&opts.penalty_mask, d)?;
    if coefficients.len() != d {
        return Err(Error::DimensionMismatch {
            context: "coefficient length must equal design column count".to_string(),
            expected: d,
            got: coefficients.len(),
        });
    }
    let columns = Columns::from_design(design);
    let y: Vec<f64> = response.iter().copied().collect();
    Ok(kkt_excess_columns(
        &columns,
        &y,
        coefficients,
        &mask,
        lambda1,
        lambda2,
        opts.tolerance,
    ))
}

fn kkt_excess_columns(
    columns: &Columns,
    response: &[f64],
    coefficients: &[f64],
    mask: &[bool],
    lambda1: f64,
    lambda2: f64,
    tolerance: f64,
) -> f64 {
    let d = columns.cols.len();
    // fresh residual, independent of any incrementally maintained state
    let mut residual: Vec<f64> = response.to_vec();
    for (col, &b) in columns.cols.iter().zip(coefficients) {
        if b != 0.0 {
            for (r, x) in residual.iter_mut().zip(col) {
                *r -= x * b;
            }
        }
    }
    let slack = 10.0 * tolerance;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..d {
        let g = dot(&columns.cols[j], &residual);
        let sq = columns.sq_norms[j];
        let b = coefficients[j];
        let excess = if mask[j] {
            if b != 0.0 {
                (-2.0 * g + 2.0 * lambda2 * b + lambda1 * b.signum()).abs() - slack * (sq + lambda2)
            } else {
                (2.0 * g).abs() - (lambda1 + slack)
            }
        } else {
            (2.0 * g).abs() - slack * sq
        };
        worst = worst.max(excess);
    }
    worst
}

/// Minimize the penalized objective for a single response column.
///
/// Non-convergence is an error carrying the final report, never a silent
/// success; recover it with [`Error::nonconverged_report`] if partial
/// results are acceptable.
pub fn solve_elastic_net(
    design: ArrayView2<f64>,
    response: ArrayView1<f64>,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let columns = Columns::from_design(&design);
    solve_with_columns(&columns, &response.to_vec(), lambda1, lambda2, opts)
}

fn solve_with_columns(
    columns: &Columns,
    response: &[f64],
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let d = columns.cols.len();
    let n = response.len();
    if d == 0 {
        return Err(Error::EmptyBlock { block: "design" });
    }
    for (j, col) in columns.cols.iter().enumerate() {
        if col.len() != n {
            return Err(Error::DimensionMismatch {
                context: format!("design column {j} length vs response"),
                expected: n,
                got: col.len(),
            });
        }
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
        return Err(Error::InvalidConfig(
            "penalties must be finite and non-negative".to_string(),
        ));
    }
    if opts.tolerance <= 0.0 {
        return Err(Error::InvalidConfig(
            "tolerance must be positive".to_string(),
        ));
    }
    let mask = resolve_mask(&opts.penalty_mask, d)?;
    for (j, (&sq, &penalized)) in columns.sq_norms.iter().zip(&mask).enumerate() {
        // A zero column with a ridge penalty resolves to a zero
        // coefficient; without one the update divides by zero.
        if sq == 0.0 && !(penalized && lambda2 > 0.0) {
            return Err(Error::ZeroNormColumn { col: j });
        }
    }

    let mut coef = match &opts.warm_start {
        Some(w) => {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "warm_start length must equal design column count".to_string(),
                    expected: d,
                    got: w.len(),
                });
            }
            w.clone()
        }
        None => vec![0.0; d],
    };

    let mut residual: Vec<f64> = response.to_vec();
    for (col, &b) in columns.cols.iter().zip(&coef) {
        if b != 0.0 {
            for (r, x) in residual.iter_mut().zip(col) {
                *r -= x * b;
            }
        }
    }

    let mut prev_objective = f64::INFINITY;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let sq = columns.sq_norms[j];
            if sq == 0.0 {
                coef[j] = 0.0;
                continue;
            }
            let col = &columns.cols[j];
            let old = coef[j];
            if old != 0.0 {
                for (r, x) in residual.iter_mut().zip(col) {
                    *r += x * old;
                }
            }
            let g = dot(col, &residual);
            let new = if mask[j] {
                soft_threshold(g, lambda1 / 2.0) / (sq + lambda2)
            } else {
                g / sq
            };
            if new != 0.0 {
                for (r, x) in residual.iter_mut().zip(col) {
                    *r -= x * new;
                }
            }
            coef[j] = new;
            max_change = max_change.max((new - old).abs());
        }
        iterations += 1;
        last_change = max_change;

        let obj = objective(&residual, &coef, &mask, lambda1, lambda2);
        debug_assert!(
            obj <= prev_objective * (1.0 + 1e-12) + 1e-300,
            "objective increased across a sweep: {prev_objective} -> {obj}"
        );
        prev_objective = obj;

        // Coefficient stagnation alone is not the contract; certify the
        // stationarity conditions before declaring convergence.
        if max_change <= opts.tolerance
            && kkt_excess_columns(
                columns,
                response,
                &coef,
                &mask,
                lambda1,
                lambda2,
                opts.tolerance,
            ) <= 0.0
        {
            converged = true;
            break;
        }
    }

    let objective = objective(&residual, &coef, &mask, lambda1, lambda2);
    let active_set: Vec<usize> = (0..d).filter(|&j| coef[j] != 0.0).collect();
    let report = SolveReport {
        coefficients: coef,
        iterations,
        converged,
        objective,
        active_set,
        last_change,
    };
    if !converged {
        return Err(Error::NoConvergence {
            report: Box::new(report),
        });
    }
    Ok(report)
}

/// Fit one penalized regression per response column. The joint objective
/// decomposes into independent per-column problems, so column `k` of the
/// output is bit-for-bit the single-column solve of `responses[:, k]`.
/// Columns may run concurrently; output order never depends on scheduling.
pub fn fit_multiresponse(
    design: ArrayView2<f64>,
    responses: ArrayView2<f64>,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<(Array2<f64>, Vec<SolveReport>)> {
    fit_multiresponse_with(design, responses, lambda1, lambda2, opts, false)
}

/// As [`fit_multiresponse`], optionally recovering non-converged columns
/// instead of failing (their reports keep `converged = false`).
pub fn fit_multiresponse_with(
    design: ArrayView2<f64>,
    responses: ArrayView2<f64>,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
    allow_nonconverged: bool,
) -> Result<(Array2<f64>, Vec<SolveReport>)> {
    if design.nrows() != responses.nrows() {
        return Err(Error::DimensionMismatch {
            context: "design rows vs response rows".to_string(),
            expected: design.nrows(),
            got: responses.nrows(),
        });
    }
    let columns = Columns::from_design(&design);
    let k_count = responses.ncols();
    let results: Vec<Result<SolveReport>> = par::map_indexed(k_count, |k| {
        let y: Vec<f64> = responses.column(k).to_vec();
        match solve_with_columns(&columns, &y, lambda1, lambda2, opts) {
            Ok(report) => Ok(report),
            Err(Error::NoConvergence { report }) if allow_nonconverged => Ok(*report),
            Err(e) => Err(Error::column(k, e)),
        }
    });

    let mut reports = Vec::with_capacity(k_count);
    for res in results {
        reports.push(res?);
    }
    let d = design.ncols();
    let mut coef = Array2::<f64>::zeros((d, k_count));
    for (k, report) in reports.iter().enumerate() {
        for j in 0..d {
            coef[(j, k)] = report.coefficients[j];
        }
    }
    Ok((coef, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_spd;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
    }

    fn assert_kkt(
        design: &Array2<f64>,
        y: &Array1<f64>,
        l1: f64,
        l2: f64,
        opts: &SolverOptions,
        report: &SolveReport,
    ) {
        let excess = kkt_max_excess(
            &design.view(),
            &y.view(),
            l1,
            l2,
            opts,
            &report.coefficients,
        )
        .unwrap();
        assert!(
            excess <= 0.0,
            "KKT certificate failed, excess = {excess:.3e}"
        );
    }

    #[test]
    fn identity_design_reproduces_response() {
        let design = Array2::<f64>::eye(5);
        let y = array![1.0, -2.0, 3.0, 0.0, 0.5];
        let opts = SolverOptions::default();
        let report = solve_elastic_net(design.view(), y.view(), 0.0, 0.0, &opts).unwrap();
        for (b, want) in report.coefficients.iter().zip(y.iter()) {
            assert_abs_diff_eq!(b, want, epsilon = 1e-12);
        }
        assert_kkt(&design, &y, 0.0, 0.0, &opts, &report);
    }

    #[test]
    fn large_l1_kills_every_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let design = random_matrix(&mut rng, 30, 6);
        let y = Array1::from_shape_fn(30, |_| rng.gen_range(-1.0..1.0));
        let lambda1 = 2.0
            * (0..6)
                .map(|j| design.column(j).dot(&y).abs())
                .fold(0.0f64, f64::max);
        let opts = SolverOptions::default();
        let report = solve_elastic_net(design.view(), y.view(), lambda1, 0.0, &opts).unwrap();
        assert!(report.coefficients.iter().all(|&b| b == 0.0));
        assert!(report.active_set.is_empty());
        assert_kkt(&design, &y, lambda1, 0.0, &opts, &report);
    }

    #[test]
    fn ridge_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..5 {
            let design = random_matrix(&mut rng, 50, 10);
            let y = Array1::from_shape_fn(50, |_| rng.gen_range(-2.0..2.0));
            let lambda2 = [0.1, 3.0, 50.0][trial % 3];
            let opts = SolverOptions::default().with_tolerance(1e-13);
            let report = solve_elastic_net(design.view(), y.view(), 0.0, lambda2, &opts).unwrap();

            let mut gram = design.t().dot(&design);
            for j in 0..10 {
                gram[(j, j)] += lambda2;
            }
            let rhs = design.t().dot(&y);
            let direct = solve_spd(&gram.view(), &rhs.view()).unwrap();
            for j in 0..10 {
                assert_abs_diff_eq!(report.coefficients[j], direct[j], epsilon = 1e-8);
            }
            assert_kkt(&design, &y, 0.0, lambda2, &opts, &report);
        }
    }

    fn orthonormalize(mut a: Array2<f64>) -> Array2<f64> {
        let d = a.ncols();
        for j in 0..d {
            for k in 0..j {
                let proj = a.column(j).dot(&a.column(k));
                let prev = a.column(k).to_owned();
                for (x, p) in a.column_mut(j).iter_mut().zip(prev.iter()) {
                    *x -= proj * p;
                }
            }
            let norm = a.column(j).dot(&a.column(j)).sqrt();
            a.column_mut(j).mapv_inplace(|x| x / norm);
        }
        a
    }

    #[test]
    fn orthonormal_design_matches_soft_threshold_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let design = orthonormalize(random_matrix(&mut rng, 30, 6));
        let y = Array1::from_shape_fn(30, |_| rng.gen_range(-2.0..2.0));
        let (l1, l2) = (0.7, 0.4);
        let opts = SolverOptions::default().with_tolerance(1e-13);
        let report = solve_elastic_net(design.view(), y.view(), l1, l2, &opts).unwrap();
        for j in 0..6 {
            let g = design.column(j).dot(&y);
            let closed = soft_threshold(g, l1 / 2.0) / (1.0 + l2);
            assert_abs_diff_eq!(report.coefficients[j], closed, epsilon = 1e-10);
        }
        assert_kkt(&design, &y, l1, l2, &opts, &report);
    }

    #[test]
    fn unpenalized_columns_take_plain_least_squares_update() {
        // Intercept exempted from the penalty absorbs the response mean
        // even under a huge l1 weight.
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut design = Array2::<f64>::ones((n, 2));
        for i in 0..n {
            design[(i, 1)] = rng.gen_range(-1.0..1.0);
        }
        let y = Array1::from_shape_fn(n, |i| 5.0 + 0.01 * design[(i, 1)]);
        let opts = SolverOptions {
            penalty_mask: Some(vec![false, true]),
            tolerance: 1e-12,
            ..SolverOptions::default()
        };
        let report = solve_elastic_net(design.view(), y.view(), 1e6, 0.0, &opts).unwrap();
        assert!(report.coefficients[1] == 0.0);
        assert_abs_diff_eq!(report.coefficients[0], y.sum() / n as f64, epsilon = 1e-9);
        assert_kkt(&design, &y, 1e6, 0.0, &opts, &report);
    }

    #[test]
    fn zero_column_guard() {
        let design = array![[0.0, 1.0], [0.0, 2.0], [0.0, -1.0]];
        let y = array![1.0, 2.0, 3.0];
        let opts = SolverOptions::default();
        assert!(matches!(
            solve_elastic_net(design.view(), y.view(), 1.0, 0.0, &opts),
            Err(Error::ZeroNormColumn { col: 0 })
        ));
        // With a ridge weight the zero column resolves to a zero
        // coefficient instead.
        let report = solve_elastic_net(design.view(), y.view(), 1.0, 0.5, &opts).unwrap();
        assert_eq!(report.coefficients[0], 0.0);
    }

    #[test]
    fn nonconvergence_is_an_error_with_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let design = random_matrix(&mut rng, 40, 8);
        let y = Array1::from_shape_fn(40, |_| rng.gen_range(-1.0..1.0));
        let opts = SolverOptions {
            max_iterations: 1,
            tolerance: 1e-14,
            ..SolverOptions::default()
        };
        let err = solve_elastic_net(design.view(), y.view(), 0.0, 0.1, &opts).unwrap_err();
        let report = err.nonconverged_report().expect("report attached");
        assert!(!report.converged);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn objective_nonincreasing_across_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let design = random_matrix(&mut rng, 35, 7);
        let y = Array1::from_shape_fn(35, |_| rng.gen_range(-2.0..2.0));
        let mut previous = f64::INFINITY;
        for sweeps in 1..=15 {
            let opts = SolverOptions {
                max_iterations: sweeps,
                tolerance: 1e-15,
                ..SolverOptions::default()
            };
            let objective = match solve_elastic_net(design.view(), y.view(), 0.8, 0.3, &opts) {
                Ok(report) => report.objective,
                Err(e) => e.nonconverged_report().unwrap().objective,
            };
            assert!(
                objective <= previous * (1.0 + 1e-12),
                "objective rose from {previous} to {objective} at sweep {sweeps}"
            );
            previous = objective;
        }
    }

    #[test]
    fn kkt_certificate_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 30 + trial;
            let d = 5 + trial % 4;
            let design = random_matrix(&mut rng, n, d);
            let y = Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0));
            let l1 = rng.gen_range(0.0..4.0);
            let l2 = rng.gen_range(0.0..2.0);
            let mask: Vec<bool> = (0..d).map(|_| rng.gen_range(0.0..1.0) > 0.2).collect();
            let opts = SolverOptions {
                penalty_mask: Some(mask),
                tolerance: 1e-11,
                ..SolverOptions::default()
            };
            let report = solve_elastic_net(design.view(), y.view(), l1, l2, &opts).unwrap();
            assert_kkt(&design, &y, l1, l2, &opts, &report);
        }
    }

    #[test]
    fn multiresponse_matches_independent_single_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let design = random_matrix(&mut rng, 40, 8);
        let responses = random_matrix(&mut rng, 40, 3);
        let opts = SolverOptions::default().with_tolerance(1e-11);
        let (coef, reports) =
            fit_multiresponse(design.view(), responses.view(), 0.5, 1.0, &opts).unwrap();
        assert_eq!(reports.len(), 3);
        for k in 0..3 {
            let single = solve_elastic_net(
                design.view(),
                responses.column(k).to_owned().view(),
                0.5,
                1.0,
                &opts,
            )
            .unwrap();
            for j in 0..8 {
                // bit-for-bit
                assert_eq!(coef[(j, k)], single.coefficients[j]);
            }
            assert_eq!(reports[k].iterations, single.iterations);
        }
    }

    #[test]
    fn duplicated_response_columns_give_identical_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let design = random_matrix(&mut rng, 25, 5);
        let y = Array1::from_shape_fn(25, |_| rng.gen_range(-1.0..1.0));
        let mut responses = Array2::<f64>::zeros((25, 2));
        responses.column_mut(0).assign(&y);
        responses.column_mut(1).assign(&y);
        let opts = SolverOptions::default();
        let (coef, _) =
            fit_multiresponse(design.view(), responses.view(), 0.3, 0.2, &opts).unwrap();
        for j in 0..5 {
            assert_eq!(coef[(j, 0)], coef[(j, 1)]);
        }
    }

    #[test]
    fn single_column_multiresponse_degenerates_to_single_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let design = random_matrix(&mut rng, 20, 4);
        let y = Array1::from_shape_fn(20, |_| rng.gen_range(-1.0..1.0));
        let responses = y.clone().insert_axis(ndarray::Axis(1));
        let opts = SolverOptions::default();
        let (coef, reports) =
            fit_multiresponse(design.view(), responses.view(), 0.2, 0.1, &opts).unwrap();
        let single = solve_elastic_net(design.view(), y.view(), 0.2, 0.1, &opts).unwrap();
        assert_eq!(reports.len(), 1);
        for j in 0..4 {
            assert_eq!(coef[(j, 0)], single.coefficients[j]);
        }
    }

    #[test]
    fn multiresponse_errors_carry_column_index() {
        let design = array![[0.0, 1.0], [0.0, -1.0]];
        let responses = array![[1.0, 2.0], [1.0, -2.0]];
        let opts = SolverOptions::default();
        let err = fit_multiresponse(design.view(), responses.view(), 0.1, 0.0, &opts).unwrap_err();
        match err {
            Error::Column { index, source } => {
                assert_eq!(index, 0);
                assert!(matches!(*source, Error::ZeroNormColumn { col: 0 }));
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
