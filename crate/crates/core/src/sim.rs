//! The simulation harness: block-structured ground truth, the data
//! generating mechanism, recovery metrics, and the (n, sigma) grid runner.
//!
//! Noise enters the two equations at different orders: the mediator
//! equation adds `sigma * E` and the outcome equation `sigma^2 * Xi`,
//! making the second stage deliberately harder. Every dataset is a pure
//! function of its seed; replicate and cell streams derive from
//! (seed, tags) so grid runs are bit-identical regardless of thread count.

use crate::dataset::{assemble_dataset, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{fit_mmm, indirect_effect_matrix, product_fixed_order, FitOptions};
use crate::inference::{
    bootstrap_indirect, stability_index, standardized_beta_stat, type1_rate, SupportSource,
};
use crate::linalg::cholesky;
use crate::par;
use crate::rng::{derive_seed, sampling_rng};
use crate::solver::{solve_elastic_net, SolverOptions};
use crate::types::{CoefficientSet, PenaltyConfig};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// One constant-valued rectangular block: half-open row/column ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub value: f64,
}

impl Block {
    pub fn new(rows: (usize, usize), cols: (usize, usize), value: f64) -> Self {
        Block { rows, cols, value }
    }
}

/// Nonzero structure of the ground-truth matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub alpha_blocks: Vec<Block>,
    pub beta_blocks: Vec<Block>,
    pub gamma_blocks: Vec<Block>,
    /// Dense fill for the covariate-to-mediator matrix.
    pub zeta_value: f64,
    /// Dense fill for the covariate-to-outcome matrix.
    pub eta_value: f64,
}

impl Default for BlockSpec {
    /// Two disjoint 5x5 unit blocks in alpha, two 5x3 unit blocks in
    /// beta (overlapping the alpha blocks so the indirect effect is
    /// nonzero), a 4x3 block of 0.2 in gamma, and dense 0.1 covariate
    /// effects.
    fn default() -> Self {
        BlockSpec {
            alpha_blocks: vec![
                Block::new((0, 5), (0, 5), 1.0),
                Block::new((10, 15), (10, 15), 1.0),
            ],
            beta_blocks: vec![
                Block::new((0, 5), (0, 3), 1.0),
                Block::new((10, 15), (5, 8), 1.0),
            ],
            gamma_blocks: vec![Block::new((0, 4), (0, 3), 0.2)],
            zeta_value: 0.1,
            eta_value: 0.1,
        }
    }
}

impl BlockSpec {
    /// No nonzero mediation paths: the null configuration for Type-I
    /// studies.
    pub fn null() -> Self {
        BlockSpec {
            alpha_blocks: Vec::new(),
            beta_blocks: Vec::new(),
            gamma_blocks: vec![Block::new((0, 4), (0, 3), 0.2)],
            zeta_value: 0.1,
            eta_value: 0.1,
        }
    }

    /// Uniformly rescale the alpha/beta block magnitudes.
    pub fn with_magnitude(mut self, value: f64) -> Self {
        for b in self
            .alpha_blocks
            .iter_mut()
            .chain(self.beta_blocks.iter_mut())
        {
            b.value = value;
        }
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub q: usize,
    pub p: usize,
    /// Outcome count.
    pub t: usize,
    /// Substantive covariates (age, sex, ...); the generated z carries
    /// s + 1 columns once the intercept is prepended.
    pub s: usize,
    pub sigma: f64,
    /// Exposure correlation decay: Sigma_ij = rho^|i-j|.
    pub rho: f64,
    pub seed: u64,
    pub block_spec: BlockSpec,
    /// Threshold for Type-I rates on null entries.
    pub type1_threshold: f64,
    /// Bootstrap replicates for the per-cell stability index; 0 skips it.
    pub stability_replicates: usize,
}

impl SimConfig {
    /// The standard experiment shape: q = p = 20, T = 10, two
    /// substantive covariates, rho = 0.5.
    pub fn standard(n: usize, sigma: f64, seed: u64) -> Self {
        SimConfig {
            n,
            q: 20,
            p: 20,
            t: 10,
            s: 2,
            sigma,
            rho: 0.5,
            seed,
            block_spec: BlockSpec::default(),
            type1_threshold: 0.1,
            stability_replicates: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        if self.q == 0 || self.p == 0 || self.t == 0 {
            return Err(Error::InvalidConfig(
                "q, p and t must all be positive".to_string(),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.type1_threshold.is_finite() && self.type1_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "type1_threshold must be finite and non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

/// Ground-truth coefficient matrices and their indirect-effect product.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub alpha0: Array2<f64>,
    pub beta0: Array2<f64>,
    pub gamma0: Array2<f64>,
    pub zeta0: Array2<f64>,
    pub eta0: Array2<f64>,
    pub indirect0: Array2<f64>,
}

impl GroundTruth {
    /// View the truth as a coefficient set for effect formulas and the
    /// standardized statistics.
    pub fn as_coefficients(&self) -> Result<CoefficientSet> {
        CoefficientSet::from_matrices(
            self.alpha0.clone(),
            self.zeta0.clone(),
            self.beta0.clone(),
            self.gamma0.clone(),
            self.eta0.clone(),
        )
    }
}

fn fill_blocks(target: &mut Array2<f64>, blocks: &[Block]) -> Result<()> {
    let (nrows, ncols) = target.dim();
    for b in blocks {
        if b.rows.1 > nrows || b.cols.1 > ncols || b.rows.0 > b.rows.1 || b.cols.0 > b.cols.1 {
            return Err(Error::BlockOutOfRange {
                rows: b.rows,
                cols: b.cols,
                nrows,
                ncols,
            });
        }
        for r in b.rows.0..b.rows.1 {
            for c in b.cols.0..b.cols.1 {
                target[(r, c)] = b.value;
            }
        }
    }
    Ok(())
}

/// Deterministic ground truth from the block specification.
pub fn generate_truth(cfg: &SimConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let s_int = cfg.s + 1;
    let mut alpha0 = Array2::<f64>::zeros((cfg.q, cfg.p));
    let mut beta0 = Array2::<f64>::zeros((cfg.p, cfg.t));
    let mut gamma0 = Array2::<f64>::zeros((cfg.q, cfg.t));
    fill_blocks(&mut alpha0, &cfg.block_spec.alpha_blocks)?;
    fill_blocks(&mut beta0, &cfg.block_spec.beta_blocks)?;
    fill_blocks(&mut gamma0, &cfg.block_spec.gamma_blocks)?;
    let zeta0 = Array2::<f64>::from_elem((s_int, cfg.p), cfg.block_spec.zeta_value);
    let eta0 = Array2::<f64>::from_elem((s_int, cfg.t), cfg.block_spec.eta_value);
    let indirect0 = product_fixed_order(&alpha0.view(), &beta0.view());
    Ok(GroundTruth {
        alpha0,
        beta0,
        gamma0,
        zeta0,
        eta0,
        indirect0,
    })
}

/// One simulated dataset: covariates from a truncated normal (age) and a
/// Bernoulli (sex), exposures from a decaying-correlation multivariate
/// normal, then the two structural equations with noise scales sigma and
/// sigma^2. Bit-identical for a given seed.
pub fn generate_dataset(truth: &GroundTruth, cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    if truth.alpha0.dim() != (cfg.q, cfg.p)
        || truth.beta0.dim() != (cfg.p, cfg.t)
        || truth.zeta0.nrows() != cfg.s + 1
    {
        return Err(Error::ShapeMismatch(
            "ground truth dimensions do not match the configuration".to_string(),
        ));
    }
    let n = cfg.n;
    let standard = Normal::new(0.0, 1.0).expect("valid normal");

    // Covariates: age ~ N(70, 8) truncated to [50, 95], sex ~
    // Bernoulli(0.5), any further columns standard normal.
    let mut z_cov = Array2::<f64>::zeros((n, cfg.s));
    {
        let mut rng = sampling_rng(cfg.seed, &[1]);
        let age = Normal::new(70.0, 8.0).expect("valid normal");
        for col in 0..cfg.s {
            for row in 0..n {
                z_cov[(row, col)] = match col {
                    0 => loop {
                        let v = age.sample(&mut rng);
                        if (50.0..=95.0).contains(&v) {
                            break v;
                        }
                    },
                    1 => {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    _ => standard.sample(&mut rng),
                };
            }
        }
    }

    // Exposures: rows ~ MVN(0, Sigma) with Sigma_ij = rho^|i-j|.
    let mut x = Array2::<f64>::zeros((n, cfg.q));
    {
        let sigma_x = Array2::from_shape_fn((cfg.q, cfg.q), |(i, j)| {
            cfg.rho.powi((i as i32 - j as i32).abs())
        });
        let chol = cholesky(&sigma_x.view())?;
        let mut rng = sampling_rng(cfg.seed, &[2]);
        let mut g = Array1::<f64>::zeros(cfg.q);
        for row in 0..n {
            for v in g.iter_mut() {
                *v = standard.sample(&mut rng);
            }
            for i in 0..cfg.q {
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += chol[(i, j)] * g[j];
                }
                x[(row, i)] = acc;
            }
        }
    }

    let mut z = Array2::<f64>::ones((n, cfg.s + 1));
    z.slice_mut(ndarray::s![.., 1..]).assign(&z_cov);

    let mut m = x.dot(&truth.alpha0) + z.dot(&truth.zeta0);
    {
        let mut rng = sampling_rng(cfg.seed, &[3]);
        for v in m.iter_mut() {
            *v += cfg.sigma * standard.sample(&mut rng);
        }
    }

    let mut y = m.dot(&truth.beta0) + x.dot(&truth.gamma0) + z.dot(&truth.eta0);
    {
        let mut rng = sampling_rng(cfg.seed, &[4]);
        let noise_scale = cfg.sigma * cfg.sigma;
        for v in y.iter_mut() {
            *v += noise_scale * standard.sample(&mut rng);
        }
    }

    assemble_dataset(x, Some(m), Some(y), Some(z_cov))
}

/// `||estimate - truth||_F / ||truth||_F`.
pub fn nrmse(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let truth_norm: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if truth_norm == 0.0 {
        return Err(Error::ZeroTruthNorm);
    }
    let err: f64 = estimate
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(err / truth_norm)
}

/// Pearson correlation of the flattened entries; `None` when either side
/// is constant.
pub fn matrix_correlation(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<Option<f64>> {
    if estimate.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let n = estimate.len() as f64;
    let mean_e = estimate.sum() / n;
    let mean_t = truth.sum() / n;
    let mut cov = 0.0;
    let mut var_e = 0.0;
    let mut var_t = 0.0;
    for (e, t) in estimate.iter().zip(truth.iter()) {
        let de = e - mean_e;
        let dt = t - mean_t;
        cov += de * dt;
        var_e += de * de;
        var_t += dt * dt;
    }
    if var_e == 0.0 || var_t == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (var_e.sqrt() * var_t.sqrt())))
}

/// An error value that falls back to the raw Frobenius norm when the
/// truth is identically zero (where NRMSE is undefined).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorMetric {
    pub value: f64,
    pub normalized: bool,
}

fn error_metric(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<ErrorMetric> {
    match nrmse(estimate, truth) {
        Ok(value) => Ok(ErrorMetric {
            value,
            normalized: true,
        }),
        Err(Error::ZeroTruthNorm) => {
            let raw: f64 = estimate
                .iter()
                .zip(truth.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(ErrorMetric {
                value: raw,
                normalized: false,
            })
        }
        Err(e) => Err(e),
    }
}

/// How a grid cell obtains its penalties.
#[derive(Debug, Clone)]
pub enum CellPenalties {
    Fixed(PenaltyConfig),
    /// Cross-validate on the first replicate, then freeze for the cell.
    /// `None` grids fall back to [`crate::cv::default_penalty_grids`].
    CrossValidated {
        grid_m: Option<Vec<(f64, f64)>>,
        grid_y: Option<Vec<(f64, f64)>>,
        folds: usize,
    },
}

/// Per-cell replicate metrics. Vectors hold one entry per successful
/// replicate, in replicate order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub sigma: f64,
    pub penalties: PenaltyConfig,
    pub nrmse_alpha: Vec<ErrorMetric>,
    pub nrmse_beta: Vec<ErrorMetric>,
    pub nrmse_indirect: Vec<ErrorMetric>,
    pub corr_alpha: Vec<Option<f64>>,
    pub corr_beta: Vec<Option<f64>>,
    pub corr_indirect: Vec<Option<f64>>,
    pub type1_alpha: Vec<Option<f64>>,
    pub type1_beta: Vec<Option<f64>>,
    /// Stability index from the bootstrap on the first replicate; absent
    /// when `stability_replicates` is 0.
    pub stability: Option<f64>,
    /// Truth-support standardized beta statistics, studentized by the
    /// known outcome noise scale sigma^2; empty when sigma = 0.
    pub qq_samples: Vec<f64>,
    /// (replicate index, error message) for failed replicates.
    pub failures: Vec<(usize, String)>,
}

impl CellResult {
    pub fn mean_nrmse_indirect(&self) -> f64 {
        mean(self.nrmse_indirect.iter().map(|m| m.value))
    }

    pub fn median_nrmse(values: &[ErrorMetric]) -> f64 {
        let mut v: Vec<f64> = values.iter().map(|m| m.value).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        if v.is_empty() {
            f64::NAN
        } else if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Elastic-net solve of one outcome column restricted to the given
/// mediator support, with the true direct and covariate contributions
/// subtracted from the response: the estimator construction used by the
/// asymptotic-normality results. The returned set equals `truth` outside
/// the re-estimated column.
pub fn restricted_beta_estimate(
    ds: &Dataset,
    truth: &CoefficientSet,
    outcome: usize,
    lambda1: f64,
    lambda2: f64,
    support: &[usize],
    solver: &SolverOptions,
) -> Result<CoefficientSet> {
    let m = ds.require_m()?;
    let y = ds.require_y()?;
    if outcome >= truth.t() {
        return Err(Error::IndexOutOfRange {
            context: "outcome index",
            index: outcome,
            size: truth.t(),
        });
    }
    let n = ds.n();
    let mut offset_response = y.column(outcome).to_owned();
    for i in 0..n {
        let mut nuisance = 0.0;
        for j in 0..ds.q() {
            nuisance += ds.x()[(i, j)] * truth.gamma[(j, outcome)];
        }
        for c in 0..ds.s() {
            nuisance += ds.z()[(i, c)] * truth.eta[(c, outcome)];
        }
        offset_response[i] -= nuisance;
    }
    let mut design = Array2::<f64>::zeros((n, support.len()));
    for (col, &k) in support.iter().enumerate() {
        design.column_mut(col).assign(&m.column(k));
    }
    let report = solve_elastic_net(
        design.view(),
        offset_response.view(),
        lambda1,
        lambda2,
        solver,
    )?;
    let mut estimate = truth.clone();
    estimate.beta.column_mut(outcome).fill(0.0);
    for (col, &k) in support.iter().enumerate() {
        estimate.beta[(k, outcome)] = report.coefficients[col];
    }
    Ok(estimate)
}

/// Mediator-stage analogue of [`restricted_beta_estimate`]: one mediator
/// column re-estimated on its exposure support with the true covariate
/// contribution subtracted.
pub fn restricted_alpha_estimate(
    ds: &Dataset,
    truth: &CoefficientSet,
    mediator: usize,
    lambda1: f64,
    lambda2: f64,
    support: &[usize],
    solver: &SolverOptions,
) -> Result<CoefficientSet> {
    let m = ds.require_m()?;
    if mediator >= truth.p() {
        return Err(Error::IndexOutOfRange {
            context: "mediator index",
            index: mediator,
            size: truth.p(),
        });
    }
    let n = ds.n();
    let mut offset_response = m.column(mediator).to_owned();
    for i in 0..n {
        let mut nuisance = 0.0;
        for c in 0..ds.s() {
            nuisance += ds.z()[(i, c)] * truth.zeta[(c, mediator)];
        }
        offset_response[i] -= nuisance;
    }
    let mut design = Array2::<f64>::zeros((n, support.len()));
    for (col, &j) in support.iter().enumerate() {
        design.column_mut(col).assign(&ds.x().column(j));
    }
    let report = solve_elastic_net(
        design.view(),
        offset_response.view(),
        lambda1,
        lambda2,
        solver,
    )?;
    let mut estimate = truth.clone();
    estimate.alpha.column_mut(mediator).fill(0.0);
    for (col, &j) in support.iter().enumerate() {
        estimate.alpha[(j, mediator)] = report.coefficients[col];
    }
    Ok(estimate)
}

fn qq_sample(
    ds: &Dataset,
    truth_coef: &CoefficientSet,
    penalties: &PenaltyConfig,
    sigma: f64,
) -> Option<f64> {
    if sigma == 0.0 {
        return None;
    }
    // first outcome column with a nonzero support
    let (k0, support) = (0..truth_coef.t()).find_map(|k| {
        let support: Vec<usize> = (0..truth_coef.p())
            .filter(|&j| truth_coef.beta[(j, k)] != 0.0)
            .collect();
        if support.is_empty() {
            None
        } else {
            Some((k, support))
        }
    })?;
    let d = support.len();
    let direction = vec![1.0 / (d as f64).sqrt(); d];
    let solver = SolverOptions::default().with_tolerance(1e-10);
    let estimate = restricted_beta_estimate(
        ds,
        truth_coef,
        k0,
        penalties.lambda_y1,
        penalties.lambda_y2,
        &support,
        &solver,
    )
    .ok()?;
    let stat = standardized_beta_stat(
        ds,
        truth_coef,
        &estimate,
        k0,
        &direction,
        penalties.lambda_y2,
        &SupportSource::Explicit(support),
    )
    .ok()?;
    Some(stat / (sigma * sigma))
}

/// Run one (n, sigma) cell: `replicates` independent datasets are
/// generated, fit and scored. Penalties are either fixed or selected by
/// cross-validation on the first replicate and then frozen. The stability
/// bootstrap runs on the first replicate.
pub fn run_cell(
    truth: &GroundTruth,
    cfg: &SimConfig,
    penalties: &CellPenalties,
    replicates: usize,
    seed: u64,
    fit_opts: &FitOptions,
) -> Result<CellResult> {
    cfg.validate()?;
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".to_string()));
    }
    let replicate_cfg = |rep: usize| -> SimConfig {
        let mut c = cfg.clone();
        c.seed = derive_seed(seed, &[0xCE11, rep as u64]);
        c
    };

    let first_ds = generate_dataset(truth, &replicate_cfg(0))?;
    let resolved: PenaltyConfig = match penalties {
        CellPenalties::Fixed(p) => *p,
        CellPenalties::CrossValidated {
            grid_m,
            grid_y,
            folds,
        } => {
            let (default_m, default_y) = crate::cv::default_penalty_grids(&first_ds)?;
            let gm = grid_m.clone().unwrap_or(default_m);
            let gy = grid_y.clone().unwrap_or(default_y);
            crate::cv::cv_select(
                &first_ds,
                &gm,
                &gy,
                *folds,
                derive_seed(seed, &[0xCF01]),
                fit_opts,
            )?
        }
    };

    let truth_coef = truth.as_coefficients()?;
    struct RepOutcome {
        nrmse_alpha: ErrorMetric,
        nrmse_beta: ErrorMetric,
        nrmse_indirect: ErrorMetric,
        corr_alpha: Option<f64>,
        corr_beta: Option<f64>,
        corr_indirect: Option<f64>,
        type1_alpha: Option<f64>,
        type1_beta: Option<f64>,
        qq: Option<f64>,
    }
    let outcomes: Vec<std::result::Result<RepOutcome, String>> =
        par::map_indexed(replicates, |rep| {
            let run = || -> Result<RepOutcome> {
                let cfg_rep = replicate_cfg(rep);
                let ds = if rep == 0 {
                    first_ds.clone()
                } else {
                    generate_dataset(truth, &cfg_rep)?
                };
                let coef = fit_mmm(&ds, &resolved, fit_opts)?;
                let indirect = indirect_effect_matrix(&coef);
                Ok(RepOutcome {
                    nrmse_alpha: error_metric(&coef.alpha, &truth.alpha0)?,
                    nrmse_beta: error_metric(&coef.beta, &truth.beta0)?,
                    nrmse_indirect: error_metric(&indirect, &truth.indirect0)?,
                    corr_alpha: matrix_correlation(&coef.alpha, &truth.alpha0)?,
                    corr_beta: matrix_correlation(&coef.beta, &truth.beta0)?,
                    corr_indirect: matrix_correlation(&indirect, &truth.indirect0)?,
                    type1_alpha: type1_rate(
                        coef.alpha.view(),
                        truth.alpha0.view(),
                        cfg.type1_threshold,
                    )?,
                    type1_beta: type1_rate(
                        coef.beta.view(),
                        truth.beta0.view(),
                        cfg.type1_threshold,
                    )?,
                    qq: qq_sample(&ds, &truth_coef, &resolved, cfg.sigma),
                })
            };
            run().map_err(|e| e.to_string())
        });

    let mut cell = CellResult {
        n: cfg.n,
        sigma: cfg.sigma,
        penalties: resolved,
        nrmse_alpha: Vec::new(),
        nrmse_beta: Vec::new(),
        nrmse_indirect: Vec::new(),
        corr_alpha: Vec::new(),
        corr_beta: Vec::new(),
        corr_indirect: Vec::new(),
        type1_alpha: Vec::new(),
        type1_beta: Vec::new(),
        stability: None,
        qq_samples: Vec::new(),
        failures: Vec::new(),
    };
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                cell.nrmse_alpha.push(o.nrmse_alpha);
                cell.nrmse_beta.push(o.nrmse_beta);
                cell.nrmse_indirect.push(o.nrmse_indirect);
                cell.corr_alpha.push(o.corr_alpha);
                cell.corr_beta.push(o.corr_beta);
                cell.corr_indirect.push(o.corr_indirect);
                cell.type1_alpha.push(o.type1_alpha);
                cell.type1_beta.push(o.type1_beta);
                if let Some(qq) = o.qq {
                    cell.qq_samples.push(qq);
                }
            }
            Err(message) => cell.failures.push((rep, message)),
        }
    }
    if cell.nrmse_alpha.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "every replicate in cell (n = {}, sigma = {}) failed; first error: {}",
            cfg.n,
            cfg.sigma,
            cell.failures
                .first()
                .map(|(_, m)| m.as_str())
                .unwrap_or("unknown")
        )));
    }

    if cfg.stability_replicates >= 2 {
        let boot = bootstrap_indirect(
            &first_ds,
            &resolved,
            fit_opts,
            cfg.stability_replicates,
            derive_seed(seed, &[0xB001]),
        )?;
        cell.stability = Some(stability_index(&boot, boot.threshold));
    }
    Ok(cell)
}

/// One grid entry: either a finished cell or the error that aborted it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub sigma: f64,
    pub result: Option<CellResult>,
    pub error: Option<String>,
}

/// Median NRMSE of the indirect effect across the n axis for one sigma,
/// with a monotonicity verdict (one inversion of at most 5% relative is
/// tolerated as sampling noise).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaTrend {
    pub sigma: f64,
    pub n_values: Vec<usize>,
    pub median_nrmse_indirect: Vec<f64>,
    pub monotone: bool,
}

pub fn monotone_with_tolerance(values: &[f64], relative_tolerance: f64) -> bool {
    let mut inversions = 0usize;
    for w in values.windows(2) {
        if w[1] > w[0] {
            let relative = (w[1] - w[0]) / w[0].abs().max(1e-300);
            if relative > relative_tolerance {
                return false;
            }
            inversions += 1;
            if inversions > 1 {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub cells: Vec<CellRecord>,
    pub trend: Vec<SigmaTrend>,
}

impl SimResult {
    pub fn cell(&self, n: usize, sigma: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.sigma == sigma)
            .and_then(|c| c.result.as_ref())
    }

    pub fn aborted_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Run the full Cartesian (n, sigma) grid. Cell seeds derive from the
/// base seed and the cell coordinates; cell failures are recorded and the
/// grid continues.
pub fn run_grid(
    truth: &GroundTruth,
    cfg_template: &SimConfig,
    n_list: &[usize],
    sigma_list: &[f64],
    penalties: &CellPenalties,
    replicates: usize,
    fit_opts: &FitOptions,
) -> Result<SimResult> {
    if n_list.is_empty() || sigma_list.is_empty() {
        return Err(Error::InvalidConfig(
            "n_list and sigma_list must be non-empty".to_string(),
        ));
    }
    let mut cells = Vec::with_capacity(n_list.len() * sigma_list.len());
    for &n in n_list {
        for &sigma in sigma_list {
            let mut cfg = cfg_template.clone();
            cfg.n = n;
            cfg.sigma = sigma;
            let cell_seed = derive_seed(cfg_template.seed, &[n as u64, sigma.to_bits()]);
            match run_cell(truth, &cfg, penalties, replicates, cell_seed, fit_opts) {
                Ok(result) => cells.push(CellRecord {
                    n,
                    sigma,
                    result: Some(result),
                    error: None,
                }),
                Err(e) => cells.push(CellRecord {
                    n,
                    sigma,
                    result: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }

    let mut sorted_n: Vec<usize> = n_list.to_vec();
    sorted_n.sort_unstable();
    sorted_n.dedup();
    let trend = sigma_list
        .iter()
        .map(|&sigma| {
            let medians: Vec<f64> = sorted_n
                .iter()
                .map(|&n| {
                    cells
                        .iter()
                        .find(|c| c.n == n && c.sigma == sigma)
                        .and_then(|c| c.result.as_ref())
                        .map(|r| CellResult::median_nrmse(&r.nrmse_indirect))
                        .unwrap_or(f64::NAN)
                })
                .collect();
            let monotone =
                medians.iter().all(|v| v.is_finite()) && monotone_with_tolerance(&medians, 0.05);
            SigmaTrend {
                sigma,
                n_values: sorted_n.clone(),
                median_nrmse_indirect: medians,
                monotone,
            }
        })
        .collect();

    Ok(SimResult { cells, trend })
}
