//! Out-of-sample prediction and evaluation metrics.
//!
//! Mediated prediction is two-step: predicted mediators from exposures
//! and covariates, then outcomes from the predicted mediators. The
//! mediated path never reads observed mediators; that guarantee is in the
//! signature, which has no mediator parameter.

use crate::error::{Error, Result};
use crate::types::CoefficientSet;
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Outcomes from predicted mediators (exposures and covariates only).
    Mediated,
    /// Outcomes from observed mediators.
    ObservedMediator,
    /// Direct model only: `x gamma + z eta`, the gene-only style baseline.
    Direct,
}

#[derive(Debug, Clone)]
pub struct PredictionResult {
    /// Mediator matrix used by the outcome equation: predicted for the
    /// mediated mode, observed for the observed-mediator mode, absent for
    /// the direct baseline.
    pub mediators: Option<Array2<f64>>,
    pub outcomes: Array2<f64>,
    pub mode: PredictionMode,
}

fn check_new_data(
    coef: &CoefficientSet,
    x_new: &ArrayView2<f64>,
    z_new: &ArrayView2<f64>,
) -> Result<()> {
    if x_new.ncols() != coef.q() {
        return Err(Error::DimensionMismatch {
            context: "x_new columns vs fitted exposures".to_string(),
            expected: coef.q(),
            got: x_new.ncols(),
        });
    }
    if z_new.ncols() != coef.s() {
        return Err(Error::DimensionMismatch {
            context: "z_new columns vs fitted covariates".to_string(),
            expected: coef.s(),
            got: z_new.ncols(),
        });
    }
    if x_new.nrows() != z_new.nrows() {
        return Err(Error::DimensionMismatch {
            context: "x_new rows vs z_new rows".to_string(),
            expected: x_new.nrows(),
            got: z_new.nrows(),
        });
    }
    if z_new.column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidConfig(
            "z_new column 0 must be the all-ones intercept".to_string(),
        ));
    }
    Ok(())
}

/// Step one: `m_hat = x_new alpha + z_new zeta`.
pub fn predict_mediators(
    coef: &CoefficientSet,
    x_new: ArrayView2<f64>,
    z_new: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_new_data(coef, &x_new, &z_new)?;
    Ok(x_new.dot(&coef.alpha) + z_new.dot(&coef.zeta))
}

/// Step two on predicted mediators: `y_hat = m_hat beta + x_new gamma +
/// z_new eta`. Requires exposures and covariates only.
pub fn predict_outcomes(
    coef: &CoefficientSet,
    x_new: ArrayView2<f64>,
    z_new: ArrayView2<f64>,
) -> Result<PredictionResult> {
    let mediators = predict_mediators(coef, x_new, z_new)?;
    let outcomes = mediators.dot(&coef.beta) + x_new.dot(&coef.gamma) + z_new.dot(&coef.eta);
    Ok(PredictionResult {
        mediators: Some(mediators),
        outcomes,
        mode: PredictionMode::Mediated,
    })
}

/// Outcome prediction from observed mediators, the
/// both-modalities-observed baseline.
pub fn predict_outcomes_observed_m(
    coef: &CoefficientSet,
    m_new: ArrayView2<f64>,
    x_new: ArrayView2<f64>,
    z_new: ArrayView2<f64>,
) -> Result<PredictionResult> {
    check_new_data(coef, &x_new, &z_new)?;
    if m_new.ncols() != coef.p() {
        return Err(Error::DimensionMismatch {
            context: "m_new columns vs fitted mediators".to_string(),
            expected: coef.p(),
            got: m_new.ncols(),
        });
    }
    if m_new.nrows() != x_new.nrows() {
        return Err(Error::DimensionMismatch {
            context: "m_new rows vs x_new rows".to_string(),
            expected: x_new.nrows(),
            got: m_new.nrows(),
        });
    }
    let outcomes = m_new.dot(&coef.beta) + x_new.dot(&coef.gamma) + z_new.dot(&coef.eta);
    Ok(PredictionResult {
        mediators: Some(m_new.to_owned()),
        outcomes,
        mode: PredictionMode::ObservedMediator,
    })
}

/// Direct baseline without any mediator term: `y_hat = x_new gamma +
/// z_new eta`.
pub fn predict_outcomes_direct(
    coef: &CoefficientSet,
    x_new: ArrayView2<f64>,
    z_new: ArrayView2<f64>,
) -> Result<PredictionResult> {
    check_new_data(coef, &x_new, &z_new)?;
    let outcomes = x_new.dot(&coef.gamma) + z_new.dot(&coef.eta);
    Ok(PredictionResult {
        mediators: None,
        outcomes,
        mode: PredictionMode::Direct,
    })
}

/// Per-outcome regression metrics. `correlation` is `None` when either
/// column is constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub correlation: Option<f64>,
}

fn pearson(a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.sum() / n;
    let mean_b = b.sum() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some(cov / (var_a.sqrt() * var_b.sqrt()))
}

pub fn evaluate_regression(
    pred: ArrayView2<f64>,
    truth: ArrayView2<f64>,
) -> Result<Vec<RegressionMetrics>> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions are {:?}, truth is {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if pred.nrows() < 2 {
        return Err(Error::InvalidConfig(
            "evaluation needs at least 2 rows".to_string(),
        ));
    }
    let n = pred.nrows() as f64;
    Ok((0..pred.ncols())
        .map(|l| {
            let p = pred.column(l);
            let t = truth.column(l);
            let mse: f64 = p
                .iter()
                .zip(t.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n;
            RegressionMetrics {
                rmse: mse.sqrt(),
                correlation: pearson(&p, &t),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    /// Rank-statistic AUC with ties counted 0.5; `None` when only one
    /// class is present.
    pub auc: Option<f64>,
}

/// Threshold accuracy (predicted positive when `score > cut`) and AUC.
pub fn evaluate_binary(
    scores: ArrayView1<f64>,
    labels: ArrayView1<f64>,
    cut: f64,
) -> Result<BinaryMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::InvalidConfig("labels must be 0 or 1".to_string()));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidConfig("no observations".to_string()));
    }
    let correct = scores
        .iter()
        .zip(labels.iter())
        .filter(|(s, l)| (**s > cut) == (**l == 1.0))
        .count();
    let accuracy = correct as f64 / n as f64;

    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = n - n_pos;
    let auc = if n_pos == 0 || n_neg == 0 {
        None
    } else {
        // Mann-Whitney pair count; O(n^2) is fine at the sizes used here.
        let mut wins = 0.0;
        for (sp, lp) in scores.iter().zip(labels.iter()) {
            if *lp != 1.0 {
                continue;
            }
            for (sn, ln) in scores.iter().zip(labels.iter()) {
                if *ln != 0.0 {
                    continue;
                }
                if sp > sn {
                    wins += 1.0;
                } else if sp == sn {
                    wins += 0.5;
                }
            }
        }
        Some(wins / (n_pos as f64 * n_neg as f64))
    };
    Ok(BinaryMetrics { accuracy, auc })
}
