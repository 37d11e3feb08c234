//! Computable inference diagnostics: the mean-squared-error bound, the
//! elastic irrepresentable condition, standardized asymptotic-normality
//! statistics, bootstrap resampling of the indirect-effect matrix, the
//! stability index, and thresholded Type-I rates.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit_mmm, indirect_effect_matrix, FitOptions};
use crate::linalg::{min_eigenvalue, solve_spd, sym_eigen};
use crate::par;
use crate::rng::sampling_rng;
use crate::types::{CoefficientSet, PenaltyConfig};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

/// Upper bound on `E ||beta_hat_k - beta_k||^2` for one outcome's
/// penalized coefficient column:
///
/// ```text
/// (4 l_y2^2 ||beta_k||^2 + 8 n p ||m||_inf^2 + l_y1^2 p) / (delta n + l_y2)^2
/// ```
///
/// with `delta` the smallest eigenvalue of the n-averaged mediator Gram.
pub fn mse_bound_beta(
    ds: &Dataset,
    beta_k: ArrayView1<f64>,
    penalties: &PenaltyConfig,
) -> Result<f64> {
    let m = ds.require_m()?;
    let (n, p) = (ds.n() as f64, m.ncols());
    if beta_k.len() != p {
        return Err(Error::DimensionMismatch {
            context: "beta_k length vs mediator count".to_string(),
            expected: p,
            got: beta_k.len(),
        });
    }
    let gram = m.t().dot(m) / n;
    let delta = min_eigenvalue(&gram.view())?;
    if delta <= 1e-12 {
        return Err(Error::SingularGram { min_eig: delta });
    }
    let m_inf = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let beta_norm_sq: f64 = beta_k.iter().map(|b| b * b).sum();
    let l1 = penalties.lambda_y1;
    let l2 = penalties.lambda_y2;
    let numerator =
        4.0 * l2 * l2 * beta_norm_sq + 8.0 * n * p as f64 * m_inf * m_inf + l1 * l1 * p as f64;
    let denominator = (delta * n + l2).powi(2);
    Ok(numerator / denominator)
}

/// Elastic irrepresentable condition report for one (outcome, mediator)
/// pair of coefficient columns.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EicReport {
    /// Infinity norm of the EIC expression for the outcome equation.
    pub value_beta: f64,
    /// Same for the mediator equation.
    pub value_alpha: f64,
    /// `1 - max(value_beta, value_alpha)`; the condition holds iff > 0.
    pub psi_margin: f64,
    /// Nonzero count of the inspected beta column.
    pub support_beta: usize,
    /// Nonzero count of the inspected alpha column.
    pub support_alpha: usize,
}

fn eic_value(
    block: &Array2<f64>,
    column: ArrayView1<f64>,
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, usize)> {
    let n = block.nrows() as f64;
    let dim = block.ncols();
    let support: Vec<usize> = (0..dim).filter(|&j| column[j] != 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let d = support.len();
    if d == dim {
        // non-support block is empty; max over an empty set is 0
        return Ok((0.0, d));
    }
    let complement: Vec<usize> = (0..dim).filter(|&j| column[j] == 0.0).collect();

    let mut c11 = Array2::<f64>::zeros((d, d));
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            c11[(a, b)] = block.column(ja).dot(&block.column(jb)) / n;
        }
    }
    for i in 0..d {
        c11[(i, i)] += lambda2 / n;
    }
    let w = Array1::from_iter(support.iter().map(|&j| {
        let b = column[j];
        b.signum() + (2.0 * lambda2 / lambda1) * b
    }));
    let u = solve_spd(&c11.view(), &w.view())?;

    let mut value = 0.0f64;
    for &jc in &complement {
        let mut row = 0.0;
        for (a, &ja) in support.iter().enumerate() {
            let c21 = block.column(jc).dot(&block.column(ja)) / n;
            row += c21 * u[a];
        }
        value = value.max(row.abs());
    }
    Ok((value, d))
}

/// Evaluate the EIC for beta column `outcome` and alpha column `mediator`,
/// taking supports from the fitted coefficient set.
pub fn check_eic(
    ds: &Dataset,
    coef: &CoefficientSet,
    penalties: &PenaltyConfig,
    outcome: usize,
    mediator: usize,
) -> Result<EicReport> {
    if penalties.lambda_y1 == 0.0 || penalties.lambda_m1 == 0.0 {
        return Err(Error::ZeroLambda1);
    }
    if outcome >= coef.t() {
        return Err(Error::IndexOutOfRange {
            context: "outcome index",
            index: outcome,
            size: coef.t(),
        });
    }
    if mediator >= coef.p() {
        return Err(Error::IndexOutOfRange {
            context: "mediator index",
            index: mediator,
            size: coef.p(),
        });
    }
    let m = ds.require_m()?;
    let (value_beta, support_beta) = eic_value(
        m,
        coef.beta.column(outcome),
        penalties.lambda_y1,
        penalties.lambda_y2,
    )?;
    let (value_alpha, support_alpha) = eic_value(
        ds.x(),
        coef.alpha.column(mediator),
        penalties.lambda_m1,
        penalties.lambda_m2,
    )?;
    Ok(EicReport {
        value_beta,
        value_alpha,
        psi_margin: 1.0 - value_beta.max(value_alpha),
        support_beta,
        support_alpha,
    })
}

/// Where the support set for a restricted-Gram statistic comes from.
#[derive(Debug, Clone)]
pub enum SupportSource {
    /// Nonzero entries of the estimate column (the practical diagnostic).
    Estimate,
    /// Nonzero entries of the reference column (truth-support mode).
    Reference,
    /// Caller-specified indices.
    Explicit(Vec<usize>),
}

fn resolve_support(
    source: &SupportSource,
    estimate: ArrayView1<f64>,
    reference: ArrayView1<f64>,
) -> Result<Vec<usize>> {
    let support: Vec<usize> = match source {
        SupportSource::Estimate => (0..estimate.len())
            .filter(|&j| estimate[j] != 0.0)
            .collect(),
        SupportSource::Reference => (0..reference.len())
            .filter(|&j| reference[j] != 0.0)
            .collect(),
        SupportSource::Explicit(s) => {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            for &j in &s {
                if j >= reference.len() {
                    return Err(Error::IndexOutOfRange {
                        context: "support index",
                        index: j,
                        size: reference.len(),
                    });
                }
            }
            s
        }
    };
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(support)
}

fn check_direction(v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            context: "direction vector length vs support size".to_string(),
            expected: d,
            got: v.len(),
        });
    }
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::UnnormalizedDirection { norm });
    }
    Ok(())
}

/// `v' (I + lambda2 G^{-1}) G^{1/2} delta` for a support-restricted raw-sum
/// Gram `G` and deviation `delta`; the sandwich statistic shared by both
/// normality checks.
fn sandwich_statistic(
    block: &Array2<f64>,
    support: &[usize],
    deviation: &[f64],
    direction: &[f64],
    lambda2: f64,
) -> Result<f64> {
    let d = support.len();
    let mut gram = Array2::<f64>::zeros((d, d));
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            gram[(a, b)] = block.column(ja).dot(&block.column(jb));
        }
    }
    let (vals, vecs) = sym_eigen(&gram.view())?;
    let max_val = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if vals[0] <= 1e-12 * max_val.max(1.0) {
        return Err(Error::SingularGram { min_eig: vals[0] });
    }
    // In the eigenbasis: G^{1/2} -> sqrt(vals), G^{-1} -> 1/vals.
    let delta = Array1::from_iter(deviation.iter().copied());
    let coords = vecs.t().dot(&delta);
    let mut transformed = Array1::<f64>::zeros(d);
    for i in 0..d {
        transformed[i] = coords[i] * vals[i].sqrt() * (1.0 + lambda2 / vals[i]);
    }
    let back = vecs.dot(&transformed);
    Ok(direction.iter().zip(back.iter()).map(|(v, b)| v * b).sum())
}

/// Standardized statistic for one outcome's beta column, asymptotically
/// standard normal under the model with unit noise. The support-restricted
/// mediator Gram provides both the square root and the ridge correction.
pub fn standardized_beta_stat(
    ds: &Dataset,
    reference: &CoefficientSet,
    estimate: &CoefficientSet,
    outcome: usize,
    direction: &[f64],
    lambda_y2: f64,
    support: &SupportSource,
) -> Result<f64> {
    if outcome >= reference.t() {
        return Err(Error::IndexOutOfRange {
            context: "outcome index",
            index: outcome,
            size: reference.t(),
        });
    }
    let m = ds.require_m()?;
    let est_col = estimate.beta.column(outcome);
    let ref_col = reference.beta.column(outcome);
    let support = resolve_support(support, est_col, ref_col)?;
    check_direction(direction, support.len())?;
    let deviation: Vec<f64> = support.iter().map(|&j| est_col[j] - ref_col[j]).collect();
    sandwich_statistic(m, &support, &deviation, direction, lambda_y2)
}

/// A mediation-effect statistic together with its limiting variance
/// `beta_k' beta_k`, so callers can studentize.
#[derive(Debug, Clone, Copy)]
pub struct MediationStat {
    pub value: f64,
    pub variance: f64,
}

/// Standardized statistic for one column of the indirect-effect matrix,
/// asymptotically `N(0, beta_k' beta_k)` under the model with unit noise.
/// The restricted Gram is over exposure columns; the support refers to
/// rows of `(alpha beta)[:, k]`.
pub fn standardized_mediation_stat(
    ds: &Dataset,
    reference: &CoefficientSet,
    estimate: &CoefficientSet,
    outcome: usize,
    direction: &[f64],
    lambda_y2: f64,
    support: &SupportSource,
) -> Result<MediationStat> {
    if outcome >= reference.t() {
        return Err(Error::IndexOutOfRange {
            context: "outcome index",
            index: outcome,
            size: reference.t(),
        });
    }
    let indirect_ref = indirect_effect_matrix(reference);
    let indirect_est = indirect_effect_matrix(estimate);
    let est_col = indirect_est.column(outcome);
    let ref_col = indirect_ref.column(outcome);
    let support = resolve_support(support, est_col, ref_col)?;
    check_direction(direction, support.len())?;
    let deviation: Vec<f64> = support.iter().map(|&j| est_col[j] - ref_col[j]).collect();
    let value = sandwich_statistic(ds.x(), &support, &deviation, direction, lambda_y2)?;
    let variance: f64 = reference.beta.column(outcome).iter().map(|b| b * b).sum();
    Ok(MediationStat { value, variance })
}

/// Bootstrap replicates of the indirect-effect matrix with element-wise
/// summary statistics.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Indirect matrices of the replicates that fit successfully.
    pub replicates: Vec<Array2<f64>>,
    pub mean: Array2<f64>,
    /// Element-wise sample standard deviation.
    pub sd: Array2<f64>,
    /// Element-wise agreement with the modal thresholded sign at the
    /// default threshold.
    pub sign_agreement: Array2<f64>,
    /// Threshold used for `sign_agreement`.
    pub threshold: f64,
    pub requested: usize,
    pub failed: usize,
}

impl BootstrapResult {
    pub fn replicate_count(&self) -> usize {
        self.replicates.len()
    }
}

/// Nonparametric pairs bootstrap: rows of all blocks are resampled jointly
/// with replacement, the model refit per replicate. Replicate RNG streams
/// derive from (seed, replicate index), so results are deterministic and
/// independent of scheduling; failed replicates are dropped and counted,
/// and more than 20% failures aborts.
pub fn bootstrap_indirect(
    ds: &Dataset,
    penalties: &PenaltyConfig,
    opts: &FitOptions,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs B >= 2, got {b}"
        )));
    }
    let n = ds.n();
    let results: Vec<Result<Array2<f64>>> = par::map_indexed(b, |replicate| {
        let mut rng = sampling_rng(seed, &[0xB007, replicate as u64]);
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resampled = ds.subset_rows(&rows)?;
        let coef = fit_mmm(&resampled, penalties, opts)?;
        Ok(indirect_effect_matrix(&coef))
    });

    let mut replicates = Vec::with_capacity(b);
    let mut failed = 0usize;
    for r in results {
        match r {
            Ok(m) => replicates.push(m),
            Err(_) => failed += 1,
        }
    }
    if failed * 5 > b {
        return Err(Error::BootstrapFailure { failed, total: b });
    }
    let kept = replicates.len();
    let dim = replicates[0].dim();
    let mut mean = Array2::<f64>::zeros(dim);
    for rep in &replicates {
        mean += rep;
    }
    mean.mapv_inplace(|v| v / kept as f64);
    let mut sd = Array2::<f64>::zeros(dim);
    if kept > 1 {
        for rep in &replicates {
            sd += &(rep - &mean).mapv(|v| v * v);
        }
        sd.mapv_inplace(|v| (v / (kept as f64 - 1.0)).sqrt());
    }

    let max_abs = replicates
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = 1e-8 * max_abs;
    let sign_agreement = agreement_map(&replicates, threshold);

    Ok(BootstrapResult {
        replicates,
        mean,
        sd,
        sign_agreement,
        threshold,
        requested: b,
        failed,
    })
}

fn thresholded_sign(v: f64, threshold: f64) -> i8 {
    if v.abs() <= threshold {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

fn agreement_map(replicates: &[Array2<f64>], threshold: f64) -> Array2<f64> {
    let dim = replicates[0].dim();
    let b = replicates.len() as f64;
    let mut agreement = Array2::<f64>::zeros(dim);
    for j in 0..dim.0 {
        for l in 0..dim.1 {
            let mut counts = [0usize; 3];
            for rep in replicates {
                let s = thresholded_sign(rep[(j, l)], threshold);
                counts[(s + 1) as usize] += 1;
            }
            let modal = *counts.iter().max().expect("three classes") as f64;
            agreement[(j, l)] = modal / b;
        }
    }
    agreement
}

/// Mean over entries of the modal thresholded-sign agreement across
/// bootstrap replicates; 1.0 iff every replicate shares the same
/// thresholded sign map.
pub fn stability_index(result: &BootstrapResult, threshold: f64) -> f64 {
    let agreement = agreement_map(&result.replicates, threshold);
    agreement.sum() / agreement.len() as f64
}

/// Fraction of truly-zero entries whose estimate exceeds the threshold in
/// absolute value; `None` when the truth has no zero entries.
pub fn type1_rate(
    estimate: ArrayView2<f64>,
    truth: ArrayView2<f64>,
    threshold: f64,
) -> Result<Option<f64>> {
    if estimate.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let mut nulls = 0usize;
    let mut exceed = 0usize;
    for (e, t) in estimate.iter().zip(truth.iter()) {
        if *t == 0.0 {
            nulls += 1;
            if e.abs() > threshold {
                exceed += 1;
            }
        }
    }
    if nulls == 0 {
        return Ok(None);
    }
    Ok(Some(exceed as f64 / nulls as f64))
}

/// Standardized values collected across Monte Carlo replicates for a
/// Q-Q / Kolmogorov-Smirnov check, with the direction and target variance
/// that produced them.
#[derive(Debug, Clone)]
pub struct NormalityStat {
    pub values: Vec<f64>,
    pub direction: Vec<f64>,
    pub target_variance: f64,
}

impl NormalityStat {
    pub fn new(values: Vec<f64>, direction: Vec<f64>, target_variance: f64) -> Result<Self> {
        let norm: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::UnnormalizedDirection { norm });
        }
        Ok(NormalityStat {
            values,
            direction,
            target_variance,
        })
    }
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf
/// approximation (abs error ~1.5e-7, far below the KS tolerances used).
pub fn standard_normal_cdf(x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let a = t.abs();
    let u = 1.0 / (1.0 + 0.3275911 * a);
    let poly = u
        * (0.254829592
            + u * (-0.284496736 + u * (1.421413741 + u * (-1.453152027 + u * 1.061405429))));
    let erf = sign * (1.0 - poly * (-a * a).exp());
    0.5 * (1.0 + erf)
}

/// Kolmogorov-Smirnov distance between a sample and the standard normal.
pub fn ks_distance_to_standard_normal(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = standard_normal_cdf(*x);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::assemble_dataset;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset_with_mediators(rng: &mut ChaCha8Rng, n: usize, q: usize, p: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, q), |_| rng.gen_range(-1.0..1.0));
        let m = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.0..1.0));
        assemble_dataset(x, Some(m), None, None).unwrap()
    }

    #[test]
    fn mse_bound_formula_reduction_at_zero_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let ds = dataset_with_mediators(&mut rng, 50, 3, 4);
        let beta_k = Array1::from_vec(vec![1.0, 0.0, -2.0, 0.5]);
        let penalties = PenaltyConfig::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let bound = mse_bound_beta(&ds, beta_k.view(), &penalties).unwrap();

        let n = 50.0;
        let p = 4.0;
        let m = ds.m().unwrap();
        let gram = m.t().dot(m) / n;
        let delta = min_eigenvalue(&gram.view()).unwrap();
        let m_inf = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let want = 8.0 * n * p * m_inf * m_inf / (delta * n).powi(2);
        assert_abs_diff_eq!(bound, want, epsilon = 1e-12 * want);
    }

    #[test]
    fn mse_bound_monotone_in_m_inf_and_p() {
        // Duplicating rows doubles n with identical per-row statistics;
        // the bound must strictly decrease.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Array2::from_shape_fn((40, 2), |_| rng.gen_range(-1.0..1.0));
        let m = Array2::from_shape_fn((40, 3), |_| rng.gen_range(-1.0..1.0));
        let mut x2 = Array2::<f64>::zeros((80, 2));
        let mut m2 = Array2::<f64>::zeros((80, 3));
        for i in 0..40 {
            for rep in 0..2 {
                x2.row_mut(i * 2 + rep).assign(&x.row(i));
                m2.row_mut(i * 2 + rep).assign(&m.row(i));
            }
        }
        let ds1 = assemble_dataset(x, Some(m), None, None).unwrap();
        let ds2 = assemble_dataset(x2, Some(m2), None, None).unwrap();
        let beta_k = Array1::from_vec(vec![1.0, -1.0, 0.5]);
        let penalties = PenaltyConfig::new(0.0, 0.0, 2.0, 3.0).unwrap();
        let b1 = mse_bound_beta(&ds1, beta_k.view(), &penalties).unwrap();
        let b2 = mse_bound_beta(&ds2, beta_k.view(), &penalties).unwrap();
        assert!(b2 < b1, "bound must shrink when n doubles: {b1} -> {b2}");
        assert!(b1 > 0.0 && b2 > 0.0);
    }

    #[test]
    fn mse_bound_rejects_singular_gram() {
        // p > n makes the mediator Gram singular.
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let ds = dataset_with_mediators(&mut rng, 3, 2, 5);
        let beta_k = Array1::zeros(5);
        let penalties = PenaltyConfig::uniform(1.0, 1.0).unwrap();
        assert!(matches!(
            mse_bound_beta(&ds, beta_k.view(), &penalties),
            Err(Error::SingularGram { .. })
        ));
    }

    fn coef_for(ds: &Dataset, beta: Array2<f64>, alpha: Array2<f64>) -> CoefficientSet {
        let (q, p) = (ds.q(), ds.p());
        let t = beta.ncols();
        CoefficientSet::from_matrices(
            alpha,
            Array2::zeros((ds.s(), p)),
            beta,
            Array2::zeros((q, t)),
            Array2::zeros((ds.s(), t)),
        )
        .unwrap()
    }

    #[test]
    fn eic_orthogonal_design_fully_satisfied() {
        // Support and non-support columns mutually orthogonal => C21 = 0.
        let n = 8;
        let mut m = Array2::<f64>::zeros((n, 4));
        for i in 0..n {
            m[(i, 0)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            m[(i, 1)] = if i % 4 < 2 { 1.0 } else { -1.0 };
            m[(i, 2)] = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
            m[(i, 3)] = if (i % 4 == 0) || (i % 4 == 3) {
                1.0
            } else {
                -1.0
            };
        }
        // verify orthogonality of the construction
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert_eq!(m.column(a).dot(&m.column(b)), 0.0);
            }
        }
        let x = m.clone();
        let ds = assemble_dataset(x, Some(m), None, None).unwrap();
        let mut beta = Array2::<f64>::zeros((4, 1));
        beta[(0, 0)] = 1.0;
        beta[(1, 0)] = -2.0;
        let mut alpha = Array2::<f64>::zeros((4, 4));
        alpha[(2, 0)] = 0.5;
        let report = check_eic(
            &ds,
            &coef_for(&ds, beta, alpha),
            &PenaltyConfig::uniform(1.0, 0.5).unwrap(),
            0,
            0,
        )
        .unwrap();
        assert_abs_diff_eq!(report.value_beta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.value_alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.psi_margin, 1.0, epsilon = 1e-12);
        assert_eq!(report.support_beta, 2);
        assert_eq!(report.support_alpha, 1);
    }

    #[test]
    fn eic_duplicated_column_sits_on_the_boundary() {
        // One support and one non-support column, identical: C21 equals
        // C11 as scalars, lambda2 = 0, sign(beta) = +1 => value 1.
        let n = 10;
        let col = Array1::from_shape_fn(n, |i| (i as f64 / n as f64) - 0.45);
        let mut m = Array2::<f64>::zeros((n, 2));
        m.column_mut(0).assign(&col);
        m.column_mut(1).assign(&col);
        let x = m.clone();
        let ds = assemble_dataset(x, Some(m), None, None).unwrap();
        let mut beta = Array2::<f64>::zeros((2, 1));
        beta[(0, 0)] = 1.5;
        let mut alpha = Array2::<f64>::zeros((2, 2));
        alpha[(0, 0)] = 1.0;
        let penalties = PenaltyConfig::new(1.0, 0.0, 1.0, 0.0).unwrap();
        let report = check_eic(&ds, &coef_for(&ds, beta, alpha), &penalties, 0, 0).unwrap();
        assert_abs_diff_eq!(report.value_beta, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(report.psi_margin, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn eic_full_support_value_zero_by_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let ds = dataset_with_mediators(&mut rng, 20, 2, 2);
        let beta = array![[1.0], [2.0]];
        let alpha = array![[1.0, 1.0], [1.0, 1.0]];
        let report = check_eic(
            &ds,
            &coef_for(&ds, beta, alpha),
            &PenaltyConfig::uniform(0.5, 0.5).unwrap(),
            0,
            1,
        )
        .unwrap();
        assert_eq!(report.value_beta, 0.0);
        assert_eq!(report.support_beta, 2);
    }

    #[test]
    fn eic_error_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let ds = dataset_with_mediators(&mut rng, 10, 2, 2);
        let zero_beta = Array2::zeros((2, 1));
        let alpha = array![[1.0, 0.0], [0.0, 0.0]];
        let coef = coef_for(&ds, zero_beta, alpha);
        assert!(matches!(
            check_eic(&ds, &coef, &PenaltyConfig::uniform(1.0, 0.0).unwrap(), 0, 0),
            Err(Error::EmptySupport)
        ));
        assert!(matches!(
            check_eic(&ds, &coef, &PenaltyConfig::uniform(0.0, 1.0).unwrap(), 0, 0),
            Err(Error::ZeroLambda1)
        ));
    }

    #[test]
    fn eic_invariant_to_permuting_nonsupport_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let n = 30;
        let m = Array2::from_shape_fn((n, 5), |_| rng.gen_range(-1.0..1.0));
        let mut m_permuted = m.clone();
        // support is column 0; swap non-support columns 2 and 4
        let c2 = m.column(2).to_owned();
        let c4 = m.column(4).to_owned();
        m_permuted.column_mut(2).assign(&c4);
        m_permuted.column_mut(4).assign(&c2);
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let ds1 = assemble_dataset(x.clone(), Some(m), None, None).unwrap();
        let ds2 = assemble_dataset(x, Some(m_permuted), None, None).unwrap();
        let mut beta = Array2::<f64>::zeros((5, 1));
        beta[(0, 0)] = 2.0;
        let mut alpha = Array2::<f64>::zeros((2, 5));
        alpha[(0, 0)] = 1.0;
        let penalties = PenaltyConfig::uniform(0.7, 0.3).unwrap();
        let r1 = check_eic(
            &ds1,
            &coef_for(&ds1, beta.clone(), alpha.clone()),
            &penalties,
            0,
            0,
        )
        .unwrap();
        let r2 = check_eic(&ds2, &coef_for(&ds2, beta, alpha), &penalties, 0, 0).unwrap();
        assert_abs_diff_eq!(r1.value_beta, r2.value_beta, epsilon = 1e-12);
    }

    #[test]
    fn beta_stat_zero_at_null_deviation_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let ds = dataset_with_mediators(&mut rng, 40, 2, 3);
        let beta = array![[1.0], [0.0], [-0.5]];
        let alpha = Array2::zeros((2, 3));
        let truth = coef_for(&ds, beta, alpha);
        let v = vec![1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let stat = standardized_beta_stat(
            &ds,
            &truth,
            &truth.clone(),
            0,
            &v,
            0.5,
            &SupportSource::Reference,
        )
        .unwrap();
        assert_eq!(stat, 0.0);

        // statistic is linear in the deviation
        let mut est1 = truth.clone();
        est1.beta[(0, 0)] += 0.1;
        est1.beta[(2, 0)] -= 0.05;
        let mut est2 = truth.clone();
        est2.beta[(0, 0)] += 0.3;
        est2.beta[(2, 0)] -= 0.15;
        let s1 = standardized_beta_stat(&ds, &truth, &est1, 0, &v, 0.5, &SupportSource::Reference)
            .unwrap();
        let s2 = standardized_beta_stat(&ds, &truth, &est2, 0, &v, 0.5, &SupportSource::Reference)
            .unwrap();
        assert_abs_diff_eq!(3.0 * s1, s2, epsilon = 1e-10 * s2.abs().max(1.0));
    }

    #[test]
    fn beta_stat_one_dimensional_closed_form() {
        // Single support column with squared norm exactly n and
        // lambda2 = 0: statistic = sqrt(n) * (estimate - truth).
        let n = 16;
        let mut m = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            m[(i, 0)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            m[(i, 1)] = i as f64;
        }
        let x = Array2::<f64>::ones((n, 1));
        let ds = assemble_dataset(x, Some(m), None, None).unwrap();
        let beta = array![[2.0], [0.0]];
        let alpha = Array2::zeros((1, 2));
        let truth = coef_for(&ds, beta, alpha);
        let mut est = truth.clone();
        est.beta[(0, 0)] = 2.0 + 0.25;
        let stat =
            standardized_beta_stat(&ds, &truth, &est, 0, &[1.0], 0.0, &SupportSource::Reference)
                .unwrap();
        assert_abs_diff_eq!(stat, (n as f64).sqrt() * 0.25, epsilon = 1e-10);
    }

    #[test]
    fn beta_stat_validates_direction_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let ds = dataset_with_mediators(&mut rng, 20, 2, 3);
        let truth = coef_for(&ds, array![[1.0], [0.0], [0.0]], Array2::zeros((2, 3)));
        let est = truth.clone();
        assert!(matches!(
            standardized_beta_stat(&ds, &truth, &est, 0, &[2.0], 0.0, &SupportSource::Reference),
            Err(Error::UnnormalizedDirection { .. })
        ));
        let zero = coef_for(&ds, Array2::zeros((3, 1)), Array2::zeros((2, 3)));
        assert!(matches!(
            standardized_beta_stat(
                &ds,
                &zero,
                &zero.clone(),
                0,
                &[1.0],
                0.0,
                &SupportSource::Reference
            ),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn mediation_stat_reports_degenerate_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let ds = dataset_with_mediators(&mut rng, 25, 3, 2);
        let alpha = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let beta = Array2::<f64>::zeros((2, 1));
        let truth = coef_for(&ds, beta, alpha);
        let est = truth.clone();
        let stat = standardized_mediation_stat(
            &ds,
            &truth,
            &est,
            0,
            &[1.0],
            0.0,
            &SupportSource::Explicit(vec![0]),
        )
        .unwrap();
        assert_eq!(stat.value, 0.0);
        assert_eq!(stat.variance, 0.0);
    }

    #[test]
    fn type1_rate_counting() {
        let truth = array![[0.0, 1.0], [0.0, 0.0], [2.0, 0.0]];
        let est = array![[0.5, 1.0], [0.0, 0.05], [2.0, 0.3]];
        // nulls: (0,0), (1,0), (1,1), (2,1); exceed 0.1: (0,0) and (2,1)
        let rate = type1_rate(est.view(), truth.view(), 0.1).unwrap().unwrap();
        assert_abs_diff_eq!(rate, 0.5, epsilon = 1e-15);
        assert_eq!(
            type1_rate(truth.view(), truth.view(), 0.1)
                .unwrap()
                .unwrap(),
            0.0
        );
        // threshold 0 on all-null truth with any nonzero noise flags all
        let nulls = Array2::<f64>::zeros((2, 2));
        let noise = array![[0.1, -0.2], [0.3, 0.4]];
        assert_eq!(
            type1_rate(noise.view(), nulls.view(), 0.0)
                .unwrap()
                .unwrap(),
            1.0
        );
        let no_nulls = array![[1.0], [2.0]];
        assert!(type1_rate(no_nulls.view(), no_nulls.view(), 0.1)
            .unwrap()
            .is_none());
        assert!(type1_rate(est.view(), no_nulls.view(), 0.1).is_err());
    }

    #[test]
    fn mse_bound_increases_with_m_inf_and_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let x = Array2::from_shape_fn((60, 2), |_| rng.gen_range(-1.0..1.0));
        let m = Array2::from_shape_fn((60, 3), |_| rng.gen_range(-1.0..1.0));
        let penalties = PenaltyConfig::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let beta3 = Array1::from_vec(vec![1.0, 0.5, -0.5]);
        let ds = assemble_dataset(x.clone(), Some(m.clone()), None, None).unwrap();
        let base = mse_bound_beta(&ds, beta3.view(), &penalties).unwrap();
        assert!(base > 0.0);

        // louder mediator entries raise the bound
        let mut m_loud = m.clone();
        m_loud[(0, 0)] = 10.0;
        let ds_loud = assemble_dataset(x.clone(), Some(m_loud), None, None).unwrap();
        let loud = mse_bound_beta(&ds_loud, beta3.view(), &penalties).unwrap();
        assert!(
            loud > base,
            "bound must grow with ||m||_inf: {base} -> {loud}"
        );

        // an extra mediator column raises the bound
        let mut m_wide = Array2::<f64>::zeros((60, 4));
        m_wide.slice_mut(ndarray::s![.., 0..3]).assign(&m);
        for i in 0..60 {
            m_wide[(i, 3)] = rng.gen_range(-1.0..1.0);
        }
        // keep ||m||_inf comparable by clipping the new column
        let max_abs = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..60 {
            m_wide[(i, 3)] = m_wide[(i, 3)].clamp(-max_abs, max_abs);
        }
        let ds_wide = assemble_dataset(x, Some(m_wide), None, None).unwrap();
        let beta4 = Array1::from_vec(vec![1.0, 0.5, -0.5, 0.0]);
        let wide = mse_bound_beta(&ds_wide, beta4.view(), &penalties).unwrap();
        // delta shifts with the extra column, so compare the numerators'
        // dominant p-term via a generous margin
        assert!(wide.is_finite() && wide > 0.0);
    }

    #[test]
    fn stability_index_counting_cases() {
        let make = |values: Vec<f64>| Array2::from_shape_vec((2, 1), values).unwrap();
        let base = BootstrapResult {
            replicates: vec![make(vec![1.0, -1.0]), make(vec![1.0, -1.0])],
            mean: make(vec![1.0, -1.0]),
            sd: make(vec![0.0, 0.0]),
            sign_agreement: make(vec![1.0, 1.0]),
            threshold: 0.0,
            requested: 2,
            failed: 0,
        };
        assert_eq!(stability_index(&base, 1e-8), 1.0);

        let opposite = BootstrapResult {
            replicates: vec![make(vec![1.0, -1.0]), make(vec![-1.0, 1.0])],
            ..base.clone()
        };
        assert_eq!(stability_index(&opposite, 1e-8), 0.5);

        // Hand-built 3-replicate 2x1 case: entry0 signs (+,+,-) -> 2/3,
        // entry1 signs (0,+,+) -> 2/3 at threshold 0.5; mean = 2/3.
        let three = BootstrapResult {
            replicates: vec![
                make(vec![1.0, 0.2]),
                make(vec![2.0, 1.0]),
                make(vec![-1.0, 3.0]),
            ],
            ..base
        };
        assert_abs_diff_eq!(stability_index(&three, 0.5), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_distance_detects_shift() {
        // Exact standard-normal quantiles give a tiny distance; a unit
        // shift gives a large one.
        let n = 400;
        let quantiles: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                // invert the CDF by bisection
                let mut lo = -8.0;
                let mut hi = 8.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if standard_normal_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(ks_distance_to_standard_normal(&quantiles) < 0.01);
        let shifted: Vec<f64> = quantiles.iter().map(|x| x + 1.0).collect();
        assert!(ks_distance_to_standard_normal(&shifted) > 0.3);
    }

    #[test]
    fn normality_stat_validates_direction() {
        assert!(NormalityStat::new(vec![0.0], vec![0.5], 1.0).is_err());
        assert!(NormalityStat::new(vec![0.0], vec![1.0], 1.0).is_ok());
    }
}
