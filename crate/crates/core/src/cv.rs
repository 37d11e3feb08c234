//! Stage-wise K-fold cross-validation for penalty selection.
//!
//! Folds are assigned by a seeded Fisher-Yates shuffle (SplitMix64, see
//! [`crate::rng`]) followed by contiguous blocks of the shuffled order,
//! so the assignment is identical on every platform. Stage-1 candidates
//! are scored by held-out mediator MSE of the `[x | z] -> m` fit; stage-2
//! candidates by held-out outcome MSE of the `[m | x | z] -> y` fit with
//! observed mediators. Ties break toward more regularization (larger
//! lambda1 + lambda2).

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit_mediator_stage, fit_outcome_stage, FitOptions};
use crate::par;
use crate::rng::fisher_yates_shuffle;
use crate::types::PenaltyConfig;

/// A list of (lambda1, lambda2) candidate pairs.
pub type PenaltyGrid = Vec<(f64, f64)>;

/// Fold membership: `folds[f]` holds the held-out row indices of fold `f`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    fisher_yates_shuffle(&mut order, seed);
    (0..folds)
        .map(|f| {
            let start = f * n / folds;
            let end = (f + 1) * n / folds;
            order[start..end].to_vec()
        })
        .collect()
}

enum CvStage {
    Mediator,
    Outcome,
}

fn heldout_mse(
    stage: &CvStage,
    train: &Dataset,
    test: &Dataset,
    lambda1: f64,
    lambda2: f64,
    opts: &FitOptions,
) -> Result<f64> {
    match stage {
        CvStage::Mediator => {
            let fit = fit_mediator_stage(train, lambda1, lambda2, opts)?;
            let pred = test.x().dot(&fit.alpha) + test.z().dot(&fit.zeta);
            let truth = test.m().expect("m required upstream");
            let sse: f64 = pred
                .iter()
                .zip(truth.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(sse / (truth.len() as f64))
        }
        CvStage::Outcome => {
            let fit = fit_outcome_stage(train, lambda1, lambda2, opts)?;
            let m_obs = test.m().expect("m required upstream");
            let pred = m_obs.dot(&fit.beta) + test.x().dot(&fit.gamma) + test.z().dot(&fit.eta);
            let truth = test.y().expect("y required upstream");
            let sse: f64 = pred
                .iter()
                .zip(truth.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(sse / (truth.len() as f64))
        }
    }
}

fn select_stage(
    stage: CvStage,
    ds: &Dataset,
    grid: &[(f64, f64)],
    folds: &[Vec<usize>],
    opts: &FitOptions,
) -> Result<(f64, f64)> {
    let n = ds.n();
    let mut in_fold = vec![usize::MAX; n];
    for (f, rows) in folds.iter().enumerate() {
        for &r in rows {
            in_fold[r] = f;
        }
    }
    let splits: Vec<(Dataset, Dataset)> = folds
        .iter()
        .enumerate()
        .map(|(f, rows)| {
            let train_rows: Vec<usize> = (0..n).filter(|&r| in_fold[r] != f).collect();
            let train = ds.subset_rows(&train_rows)?;
            let test = ds.subset_rows(rows)?;
            Ok((train, test))
        })
        .collect::<Result<_>>()?;

    // A candidate whose fit fails anywhere is disqualified with an
    // infinite score rather than aborting the search; CV is allowed to
    // keep partially converged fits.
    let mut cv_opts = opts.clone();
    cv_opts.allow_nonconverged = true;
    let scores: Vec<f64> = par::map_indexed(grid.len(), |c| {
        let (l1, l2) = grid[c];
        let mut total = 0.0;
        for (train, test) in &splits {
            match heldout_mse(&stage, train, test, l1, l2, &cv_opts) {
                Ok(mse) => total += mse,
                Err(_) => return f64::INFINITY,
            }
        }
        total / splits.len() as f64
    });

    let mut best = 0usize;
    for c in 1..grid.len() {
        let better = scores[c] < scores[best]
            || (scores[c] == scores[best] && grid[c].0 + grid[c].1 > grid[best].0 + grid[best].1);
        if better {
            best = c;
        }
    }
    if !scores[best].is_finite() {
        return Err(Error::InvalidConfig(
            "every cross-validation candidate failed to fit".to_string(),
        ));
    }
    Ok(grid[best])
}

/// Pick the per-stage penalty pairs by K-fold cross-validation.
pub fn cv_select(
    ds: &Dataset,
    grid_m: &[(f64, f64)],
    grid_y: &[(f64, f64)],
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<PenaltyConfig> {
    if grid_m.is_empty() || grid_y.is_empty() {
        return Err(Error::GridEmpty);
    }
    for &(l1, l2) in grid_m.iter().chain(grid_y) {
        if !(l1.is_finite() && l2.is_finite() && l1 >= 0.0 && l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid entries must be finite and non-negative, got ({l1}, {l2})"
            )));
        }
    }
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs K >= 2, got {folds}"
        )));
    }
    let n = ds.n();
    if n < 2 * folds {
        return Err(Error::TooFewRows {
            n,
            folds,
            min: 2 * folds,
        });
    }
    ds.require_m()?;
    ds.require_y()?;

    let assignment = fold_assignment(n, folds, seed);
    let (lambda_m1, lambda_m2) = select_stage(CvStage::Mediator, ds, grid_m, &assignment, opts)?;
    let (lambda_y1, lambda_y2) = select_stage(CvStage::Outcome, ds, grid_y, &assignment, opts)?;
    PenaltyConfig::new(lambda_m1, lambda_m2, lambda_y1, lambda_y2)
}

/// Data-driven default grids anchored at the smallest l1 weight that
/// zeroes every coordinate of the corresponding stage (computed on the
/// scaled design, matching the fit pipeline).
pub fn default_penalty_grids(ds: &Dataset) -> Result<(PenaltyGrid, PenaltyGrid)> {
    use crate::scaling::scale_columns;
    use ndarray::{concatenate, Axis};

    ds.require_m()?;
    let y = ds.require_y()?;
    let (scaled, _) = scale_columns(ds)?;
    let lambda_max = |design: &ndarray::Array2<f64>, responses: &ndarray::Array2<f64>| -> f64 {
        let mut max_corr = 0.0f64;
        for j in 0..design.ncols() {
            for k in 0..responses.ncols() {
                max_corr = max_corr.max(design.column(j).dot(&responses.column(k)).abs());
            }
        }
        2.0 * max_corr
    };

    let design1 =
        concatenate(Axis(1), &[scaled.x().view(), scaled.z().view()]).expect("rows match");
    let max1 = lambda_max(&design1, scaled.m().expect("m present"));
    let design2 = concatenate(
        Axis(1),
        &[
            scaled.m().expect("m present").view(),
            scaled.x().view(),
            scaled.z().view(),
        ],
    )
    .expect("rows match");
    let max2 = lambda_max(&design2, y);

    let build = |anchor: f64| -> PenaltyGrid {
        let factors = [0.2, 0.05, 0.01, 0.002];
        let mut grid = Vec::with_capacity(factors.len() * 2);
        for f in factors {
            let l1 = anchor * f;
            grid.push((l1, 0.0));
            grid.push((l1, 0.1 * l1));
        }
        grid
    };
    Ok((build(max1), build(max2)))
}
