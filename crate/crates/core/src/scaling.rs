//! Column scaling to l2-norm sqrt(n) and the inverse map for fitted
//! coefficients.
//!
//! Only exposure and mediator columns are scaled: each column `c` becomes
//! `c * sqrt(n) / ||c||`, matching the normalization the asymptotic theory
//! assumes. The intercept and the remaining covariate columns are left
//! alone, and coefficients are always mapped back to the original scale
//! after fitting.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::CoefficientSet;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    /// `||c||_2 / sqrt(n)`; the scaled column is `c / scale`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub x: Vec<ColumnScale>,
    pub m: Vec<ColumnScale>,
    pub applied: bool,
}

impl ScalingRecord {
    /// Record for a fit performed on raw data (all factors 1).
    pub fn identity(q: usize, p: usize) -> Self {
        let unit = ColumnScale {
            mean: 0.0,
            scale: 1.0,
        };
        ScalingRecord {
            x: vec![unit; q],
            m: vec![unit; p],
            applied: false,
        }
    }
}

fn scale_block(block: &'static str, a: &Array2<f64>) -> Result<(Array2<f64>, Vec<ColumnScale>)> {
    let n = a.nrows() as f64;
    let mut out = a.clone();
    let mut scales = Vec::with_capacity(a.ncols());
    for col in 0..a.ncols() {
        let column = a.column(col);
        let norm_sq: f64 = column.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            return Err(Error::DegenerateColumn { block, col });
        }
        let scale = (norm_sq / n).sqrt();
        let mean = column.sum() / n;
        for row in 0..a.nrows() {
            out[(row, col)] /= scale;
        }
        scales.push(ColumnScale { mean, scale });
    }
    Ok((out, scales))
}

/// Scale the x and m blocks of a dataset so every column has l2 norm
/// sqrt(n). Outcomes and covariates pass through untouched.
pub fn scale_columns(ds: &Dataset) -> Result<(Dataset, ScalingRecord)> {
    let (x, x_scales) = scale_block("x", ds.x())?;
    let (m, m_scales) = match ds.m() {
        Some(m) => {
            let (scaled, scales) = scale_block("m", m)?;
            (Some(scaled), scales)
        }
        None => (None, Vec::new()),
    };
    let record = ScalingRecord {
        x: x_scales,
        m: m_scales,
        applied: true,
    };
    let scaled =
        Dataset::from_validated_parts(x, m, ds.y().cloned(), ds.z().clone(), ds.names().clone());
    Ok((scaled, record))
}

/// Map coefficients fitted on scaled data back to the original scale.
///
/// Stage 1 fits scaled x against scaled m, stage 2 fits scaled m and x
/// against raw y, so:
///   alpha[j,k] <- alpha[j,k] * m_scale[k] / x_scale[j]
///   zeta[c,k]  <- zeta[c,k]  * m_scale[k]
///   beta[k,l]  <- beta[k,l]  / m_scale[k]
///   gamma[j,l] <- gamma[j,l] / x_scale[j]
///   eta        unchanged
/// Fitted values are identical before and after the mapping.
pub fn unscale_coefficients(coef: &CoefficientSet, rec: &ScalingRecord) -> Result<CoefficientSet> {
    if rec.x.len() != coef.q() {
        return Err(Error::ShapeMismatch(format!(
            "scaling record has {} x factors, coefficients expect {}",
            rec.x.len(),
            coef.q()
        )));
    }
    if rec.m.len() != coef.p() {
        return Err(Error::ShapeMismatch(format!(
            "scaling record has {} m factors, coefficients expect {}",
            rec.m.len(),
            coef.p()
        )));
    }
    if !rec.applied {
        return Ok(coef.clone());
    }

    let mut out = coef.clone();
    for j in 0..coef.q() {
        let sx = rec.x[j].scale;
        for k in 0..coef.p() {
            out.alpha[(j, k)] = coef.alpha[(j, k)] * rec.m[k].scale / sx;
        }
        for l in 0..coef.t() {
            out.gamma[(j, l)] = coef.gamma[(j, l)] / sx;
        }
    }
    for c in 0..coef.s() {
        for k in 0..coef.p() {
            out.zeta[(c, k)] = coef.zeta[(c, k)] * rec.m[k].scale;
        }
    }
    for k in 0..coef.p() {
        let sm = rec.m[k].scale;
        for l in 0..coef.t() {
            out.beta[(k, l)] = coef.beta[(k, l)] / sm;
        }
    }
    Ok(out)
}
