//! The two-stage fit and the mediation-effect formulas derived from it.
//!
//! Stage 1 regresses mediators on `[x | z]` with the mediator-stage
//! penalties; stage 2 regresses outcomes on `[m | x | z]` with the
//! outcome-stage penalties. The stacked coefficient matrices split into
//! `(alpha, zeta)` and `(beta, gamma, eta)`, and the indirect-effect
//! matrix is the product `alpha * beta`. Causal contrasts (CDE/NDE/NIE)
//! evaluate the plug-in formulas on the fitted coefficients.

use crate::dataset::Dataset;
use crate::error::{Error, Result, Stage};
use crate::scaling::{scale_columns, ScalingRecord};
use crate::solver::{fit_multiresponse_with, SolverOptions};
use crate::types::{CoefficientSet, ColumnDiagnostic, FitDiagnostics, PenaltyConfig};
use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};

/// Options for the two-stage fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub solver: SolverOptions,
    /// Normalize x and m columns to l2 norm sqrt(n) before solving;
    /// coefficients are always reported on the original scale.
    pub scale: bool,
    /// Exclude the intercept column from the penalty. The objective
    /// penalizes the full covariate blocks, so the library default keeps
    /// the intercept penalized; the CLI exempts it.
    pub exempt_intercept: bool,
    /// Keep per-column reports that hit the iteration cap instead of
    /// failing the fit.
    pub allow_nonconverged: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: SolverOptions::default(),
            scale: true,
            exempt_intercept: false,
            allow_nonconverged: false,
        }
    }
}

fn stage_mask(
    penalized_leading: usize,
    s: usize,
    exempt_intercept: bool,
    base: &Option<Vec<bool>>,
) -> Option<Vec<bool>> {
    if let Some(mask) = base {
        return Some(mask.clone());
    }
    if !exempt_intercept {
        return None;
    }
    let mut mask = vec![true; penalized_leading + s];
    mask[penalized_leading] = false; // z column 0 is the intercept
    Some(mask)
}

fn diagnostics_from_reports(reports: &[crate::solver::SolveReport]) -> Vec<ColumnDiagnostic> {
    reports
        .iter()
        .enumerate()
        .map(|(column, r)| ColumnDiagnostic {
            column,
            iterations: r.iterations,
            converged: r.converged,
            objective: r.objective,
        })
        .collect()
}

fn scaled_for_fit(ds: &Dataset, opts: &FitOptions) -> Result<(Dataset, ScalingRecord)> {
    if opts.scale {
        scale_columns(ds)
    } else {
        Ok((ds.clone(), ScalingRecord::identity(ds.q(), ds.p())))
    }
}

/// Coefficients of one mediator-stage fit (`[x | z] -> m`), on the
/// original data scale.
pub struct MediatorStageFit {
    pub alpha: Array2<f64>,
    pub zeta: Array2<f64>,
    pub reports: Vec<crate::solver::SolveReport>,
}

pub fn fit_mediator_stage(
    ds: &Dataset,
    lambda1: f64,
    lambda2: f64,
    opts: &FitOptions,
) -> Result<MediatorStageFit> {
    ds.require_m()?;
    let (q, s) = (ds.q(), ds.s());
    let (fit_ds, record) =
        scaled_for_fit(ds, opts).map_err(|e| Error::stage(Stage::Mediator, e))?;
    let design = concatenate(Axis(1), &[fit_ds.x().view(), fit_ds.z().view()])
        .expect("x and z share row count");
    let mut solver = opts.solver.clone();
    solver.penalty_mask = stage_mask(q, s, opts.exempt_intercept, &opts.solver.penalty_mask);
    let (theta, reports) = fit_multiresponse_with(
        design.view(),
        fit_ds.m().expect("m present").view(),
        lambda1,
        lambda2,
        &solver,
        opts.allow_nonconverged,
    )
    .map_err(|e| Error::stage(Stage::Mediator, e))?;

    let mut alpha = theta.slice(ndarray::s![0..q, ..]).to_owned();
    let mut zeta = theta.slice(ndarray::s![q..q + s, ..]).to_owned();
    for j in 0..q {
        for k in 0..alpha.ncols() {
            alpha[(j, k)] = alpha[(j, k)] * record.m[k].scale / record.x[j].scale;
        }
    }
    for c in 0..s {
        for k in 0..zeta.ncols() {
            zeta[(c, k)] *= record.m[k].scale;
        }
    }
    Ok(MediatorStageFit {
        alpha,
        zeta,
        reports,
    })
}

/// Coefficients of one outcome-stage fit (`[m | x | z] -> y`), on the
/// original data scale.
pub struct OutcomeStageFit {
    pub beta: Array2<f64>,
    pub gamma: Array2<f64>,
    pub eta: Array2<f64>,
    pub reports: Vec<crate::solver::SolveReport>,
}

pub fn fit_outcome_stage(
    ds: &Dataset,
    lambda1: f64,
    lambda2: f64,
    opts: &FitOptions,
) -> Result<OutcomeStageFit> {
    ds.require_m()?;
    ds.require_y()?;
    let (q, p, s) = (ds.q(), ds.p(), ds.s());
    let (fit_ds, record) = scaled_for_fit(ds, opts).map_err(|e| Error::stage(Stage::Outcome, e))?;
    let design = concatenate(
        Axis(1),
        &[
            fit_ds.m().expect("m present").view(),
            fit_ds.x().view(),
            fit_ds.z().view(),
        ],
    )
    .expect("blocks share row count");
    let mut solver = opts.solver.clone();
    solver.penalty_mask = stage_mask(p + q, s, opts.exempt_intercept, &opts.solver.penalty_mask);
    let (theta, reports) = fit_multiresponse_with(
        design.view(),
        fit_ds.y().expect("y present").view(),
        lambda1,
        lambda2,
        &solver,
        opts.allow_nonconverged,
    )
    .map_err(|e| Error::stage(Stage::Outcome, e))?;

    let mut beta = theta.slice(ndarray::s![0..p, ..]).to_owned();
    let mut gamma = theta.slice(ndarray::s![p..p + q, ..]).to_owned();
    let eta = theta.slice(ndarray::s![p + q..p + q + s, ..]).to_owned();
    for k in 0..p {
        for l in 0..beta.ncols() {
            beta[(k, l)] /= record.m[k].scale;
        }
    }
    for j in 0..q {
        for l in 0..gamma.ncols() {
            gamma[(j, l)] /= record.x[j].scale;
        }
    }
    Ok(OutcomeStageFit {
        beta,
        gamma,
        eta,
        reports,
    })
}

/// Fit the full model: two independent penalized multiresponse
/// regressions, coefficients returned on the original data scale.
pub fn fit_mmm(
    ds: &Dataset,
    penalties: &PenaltyConfig,
    opts: &FitOptions,
) -> Result<CoefficientSet> {
    ds.require_m()?;
    ds.require_y()?;
    if ds.n() < 2 {
        return Err(Error::InvalidConfig(format!(
            "fit requires n >= 2, got n = {}",
            ds.n()
        )));
    }
    let stage1 = fit_mediator_stage(ds, penalties.lambda_m1, penalties.lambda_m2, opts)?;
    let stage2 = fit_outcome_stage(ds, penalties.lambda_y1, penalties.lambda_y2, opts)?;
    CoefficientSet::new(
        stage1.alpha,
        stage1.zeta,
        stage2.beta,
        stage2.gamma,
        stage2.eta,
        FitDiagnostics {
            mediator_stage: diagnostics_from_reports(&stage1.reports),
            outcome_stage: diagnostics_from_reports(&stage2.reports),
        },
        ds.names().clone(),
    )
}

/// The indirect-effect matrix `alpha * beta` (q x T).
///
/// Computed with a fixed mediator-order summation so that
/// [`global_effect`] reproduces each entry exactly.
pub fn indirect_effect_matrix(coef: &CoefficientSet) -> Array2<f64> {
    product_fixed_order(&coef.alpha.view(), &coef.beta.view())
}

pub(crate) fn product_fixed_order(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (rows, inner) = a.dim();
    let cols = b.ncols();
    let mut out = Array2::<f64>::zeros((rows, cols));
    for j in 0..rows {
        for l in 0..cols {
            let mut acc = 0.0;
            for k in 0..inner {
                acc += a[(j, k)] * b[(k, l)];
            }
            out[(j, l)] = acc;
        }
    }
    out
}

fn check_index(context: &'static str, index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(Error::IndexOutOfRange {
            context,
            index,
            size,
        });
    }
    Ok(())
}

/// Total mediation effect of exposure `j` on outcome `l` through all
/// mediators: the `(j, l)` entry of `alpha * beta`.
pub fn global_effect(coef: &CoefficientSet, j: usize, l: usize) -> Result<f64> {
    check_index("exposure index", j, coef.q())?;
    check_index("outcome index", l, coef.t())?;
    let mut acc = 0.0;
    for k in 0..coef.p() {
        acc += coef.alpha[(j, k)] * coef.beta[(k, l)];
    }
    Ok(acc)
}

/// Mediation effect of exposure `j` on outcome `l` through mediator `k`
/// alone: `alpha[j,k] * beta[k,l]`.
pub fn path_effect(coef: &CoefficientSet, j: usize, k: usize, l: usize) -> Result<f64> {
    check_index("exposure index", j, coef.q())?;
    check_index("mediator index", k, coef.p())?;
    check_index("outcome index", l, coef.t())?;
    Ok(coef.alpha[(j, k)] * coef.beta[(k, l)])
}

fn contrast(
    coef: &CoefficientSet,
    x_new: &ArrayView1<f64>,
    x_ref: &ArrayView1<f64>,
) -> Result<Vec<f64>> {
    let q = coef.q();
    if x_new.len() != q || x_ref.len() != q {
        return Err(Error::DimensionMismatch {
            context: "exposure contrast vectors".to_string(),
            expected: q,
            got: if x_new.len() != q {
                x_new.len()
            } else {
                x_ref.len()
            },
        });
    }
    Ok(x_new.iter().zip(x_ref).map(|(a, b)| a - b).collect())
}

/// Controlled direct effect of the multivariate exposure contrast on
/// outcome `l`: `(x - x_ref)' gamma_l`. Passing vectors that differ in a
/// single coordinate gives the single-exposure form.
pub fn cde(
    coef: &CoefficientSet,
    x_new: ArrayView1<f64>,
    x_ref: ArrayView1<f64>,
    l: usize,
) -> Result<f64> {
    check_index("outcome index", l, coef.t())?;
    let delta = contrast(coef, &x_new, &x_ref)?;
    Ok(delta
        .iter()
        .enumerate()
        .map(|(j, d)| d * coef.gamma[(j, l)])
        .sum())
}

/// Natural direct effect; in the linear model it coincides with [`cde`].
pub fn nde(
    coef: &CoefficientSet,
    x_new: ArrayView1<f64>,
    x_ref: ArrayView1<f64>,
    l: usize,
) -> Result<f64> {
    cde(coef, x_new, x_ref, l)
}

/// Natural indirect effect: `(x - x_ref)' (alpha beta)_l`.
pub fn nie(
    coef: &CoefficientSet,
    x_new: ArrayView1<f64>,
    x_ref: ArrayView1<f64>,
    l: usize,
) -> Result<f64> {
    check_index("outcome index", l, coef.t())?;
    let delta = contrast(coef, &x_new, &x_ref)?;
    let mut acc = 0.0;
    for (j, d) in delta.iter().enumerate() {
        if *d != 0.0 {
            acc += d * global_effect(coef, j, l)?;
        }
    }
    Ok(acc)
}

/// Indirect-effect views: the full matrix plus per-path access.
#[derive(Debug, Clone)]
pub struct MediationEffects {
    indirect: Array2<f64>,
    alpha: Array2<f64>,
    beta: Array2<f64>,
}

impl MediationEffects {
    pub fn from_coefficients(coef: &CoefficientSet) -> Self {
        MediationEffects {
            indirect: indirect_effect_matrix(coef),
            alpha: coef.alpha.clone(),
            beta: coef.beta.clone(),
        }
    }

    pub fn indirect(&self) -> &Array2<f64> {
        &self.indirect
    }

    pub fn global_effect(&self, j: usize, l: usize) -> Result<f64> {
        check_index("exposure index", j, self.indirect.nrows())?;
        check_index("outcome index", l, self.indirect.ncols())?;
        Ok(self.indirect[(j, l)])
    }

    /// Per-path effects are computed on demand; the q x p x T tensor is
    /// never materialized.
    pub fn path_effect(&self, j: usize, k: usize, l: usize) -> Result<f64> {
        check_index("exposure index", j, self.alpha.nrows())?;
        check_index("mediator index", k, self.alpha.ncols())?;
        check_index("outcome index", l, self.beta.ncols())?;
        Ok(self.alpha[(j, k)] * self.beta[(k, l)])
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.alpha.nrows(), self.alpha.ncols(), self.beta.ncols())
    }
}

/// One exposure-mediator-outcome pathway and its effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPath {
    pub exposure: usize,
    pub mediator: usize,
    pub outcome: usize,
    pub value: f64,
}

/// The `count` largest per-path effects by absolute value, ties broken by
/// ascending (exposure, mediator, outcome) order. `count` is clipped to
/// the total number of paths. Uses a bounded heap, so memory stays at
/// O(count) regardless of q*p*T.
pub fn top_paths(effects: &MediationEffects, count: usize) -> Vec<RankedPath> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry {
        abs: f64,
        key: (usize, usize, usize),
        value: f64,
    }
    impl Entry {
        /// True if `self` ranks ahead of `other` in the final output.
        fn ranks_before(&self, other: &Entry) -> bool {
            match self.abs.total_cmp(&other.abs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => self.key < other.key,
            }
        }
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        // Max-heap by "worst first" so the heap root is the eviction
        // candidate.
        fn cmp(&self, other: &Self) -> Ordering {
            if self.ranks_before(other) {
                Ordering::Less
            } else if other.ranks_before(self) {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }
    }

    let (q, p, t) = effects.dims();
    let count = count.min(q * p * t);
    if count == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(count + 1);
    for j in 0..q {
        for k in 0..p {
            let a = effects.alpha[(j, k)];
            for l in 0..t {
                let value = a * effects.beta[(k, l)];
                let entry = Entry {
                    abs: value.abs(),
                    key: (j, k, l),
                    value,
                };
                if heap.len() < count {
                    heap.push(entry);
                } else if let Some(worst) = heap.peek() {
                    if entry.ranks_before(worst) {
                        heap.pop();
                        heap.push(entry);
                    }
                }
            }
        }
    }
    let mut entries: Vec<Entry> = heap.into_vec();
    entries.sort_by(|a, b| {
        if a.ranks_before(b) {
            Ordering::Less
        } else if b.ranks_before(a) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
    entries
        .into_iter()
        .map(|e| RankedPath {
            exposure: e.key.0,
            mediator: e.key.1,
            outcome: e.key.2,
            value: e.value,
        })
        .collect()
}
