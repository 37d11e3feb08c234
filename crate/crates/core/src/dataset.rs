//! Dataset assembly and validation.
//!
//! A [`Dataset`] holds the aligned exposure (`x`), mediator (`m`), outcome
//! (`y`) and covariate (`z`) blocks for `n` subjects. The covariate block
//! always carries the intercept as its first column; mediators and
//! outcomes are optional so the same type serves prediction-only inputs.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Ordered column labels for every block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockNames {
    pub exposures: Vec<String>,
    pub mediators: Vec<String>,
    pub outcomes: Vec<String>,
    /// Includes the leading `"intercept"` label.
    pub covariates: Vec<String>,
}

impl BlockNames {
    pub fn generated(q: usize, p: usize, t: usize, s: usize) -> Self {
        let label = |prefix: &str, count: usize| -> Vec<String> {
            (1..=count).map(|i| format!("{prefix}{i}")).collect()
        };
        let mut covariates = vec!["intercept".to_string()];
        covariates.extend(label("z", s.saturating_sub(1)));
        BlockNames {
            exposures: label("x", q),
            mediators: label("m", p),
            outcomes: label("y", t),
            covariates,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    m: Option<Array2<f64>>,
    y: Option<Array2<f64>>,
    z: Array2<f64>,
    names: BlockNames,
}

fn check_finite(block: &'static str, a: &ArrayView2<f64>) -> Result<()> {
    for ((row, col), v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { block, row, col });
        }
    }
    Ok(())
}

fn check_rows(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

/// Build a [`Dataset`] from raw blocks, prepending the intercept column to
/// the covariates. With no covariates given, `z` becomes the all-ones
/// column.
pub fn assemble_dataset(
    x: Array2<f64>,
    m: Option<Array2<f64>>,
    y: Option<Array2<f64>>,
    z_covariates: Option<Array2<f64>>,
) -> Result<Dataset> {
    let names_hint = None;
    assemble_dataset_named(x, m, y, z_covariates, names_hint)
}

/// As [`assemble_dataset`], with caller-provided column names. Names must
/// match block widths; the covariate list should NOT include the intercept
/// (it is inserted here).
pub fn assemble_dataset_named(
    x: Array2<f64>,
    m: Option<Array2<f64>>,
    y: Option<Array2<f64>>,
    z_covariates: Option<Array2<f64>>,
    names: Option<BlockNames>,
) -> Result<Dataset> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "x must have at least one row".to_string(),
            expected: 1,
            got: 0,
        });
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyBlock { block: "x" });
    }
    check_finite("x", &x.view())?;
    if let Some(m) = &m {
        check_rows("m rows must match x rows", n, m.nrows())?;
        if m.ncols() == 0 {
            return Err(Error::EmptyBlock { block: "m" });
        }
        check_finite("m", &m.view())?;
    }
    if let Some(y) = &y {
        check_rows("y rows must match x rows", n, y.nrows())?;
        if y.ncols() == 0 {
            return Err(Error::EmptyBlock { block: "y" });
        }
        check_finite("y", &y.view())?;
    }

    let z = match z_covariates {
        Some(c) => {
            check_rows("z rows must match x rows", n, c.nrows())?;
            check_finite("z", &c.view())?;
            let mut z = Array2::<f64>::ones((n, c.ncols() + 1));
            z.slice_mut(ndarray::s![.., 1..]).assign(&c);
            z
        }
        None => Array2::<f64>::ones((n, 1)),
    };

    let q = x.ncols();
    let p = m.as_ref().map_or(0, |m| m.ncols());
    let t = y.as_ref().map_or(0, |y| y.ncols());
    let s = z.ncols();
    let names = match names {
        Some(mut names) => {
            if names.covariates.len() == s - 1 {
                names.covariates.insert(0, "intercept".to_string());
            }
            for (label, want, got) in [
                ("exposure", q, names.exposures.len()),
                ("mediator", p, names.mediators.len()),
                ("outcome", t, names.outcomes.len()),
                ("covariate", s, names.covariates.len()),
            ] {
                if want != got {
                    return Err(Error::DimensionMismatch {
                        context: format!("{label} name count"),
                        expected: want,
                        got,
                    });
                }
            }
            names
        }
        None => BlockNames::generated(q, p, t, s),
    };

    Ok(Dataset { x, m, y, z, names })
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    /// Mediator count; 0 when the block is absent.
    pub fn p(&self) -> usize {
        self.m.as_ref().map_or(0, |m| m.ncols())
    }

    /// Outcome count; 0 when the block is absent.
    pub fn t(&self) -> usize {
        self.y.as_ref().map_or(0, |y| y.ncols())
    }

    pub fn s(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn m(&self) -> Option<&Array2<f64>> {
        self.m.as_ref()
    }

    pub fn y(&self) -> Option<&Array2<f64>> {
        self.y.as_ref()
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn names(&self) -> &BlockNames {
        &self.names
    }

    pub fn require_m(&self) -> Result<&Array2<f64>> {
        self.m.as_ref().ok_or(Error::MissingBlock { block: "m" })
    }

    pub fn require_y(&self) -> Result<&Array2<f64>> {
        self.y.as_ref().ok_or(Error::MissingBlock { block: "y" })
    }

    /// Covariates without the intercept column, as supplied to assembly.
    pub fn covariates_without_intercept(&self) -> Array2<f64> {
        self.z.slice(ndarray::s![.., 1..]).to_owned()
    }

    /// Row subset (with repetition allowed), used by bootstrap resampling
    /// and cross-validation folds.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let n = self.n();
        for &r in rows {
            if r >= n {
                return Err(Error::IndexOutOfRange {
                    context: "subset_rows",
                    index: r,
                    size: n,
                });
            }
        }
        let take = |a: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::<f64>::zeros((rows.len(), a.ncols()));
            for (dst, &src) in rows.iter().enumerate() {
                out.row_mut(dst).assign(&a.index_axis(Axis(0), src));
            }
            out
        };
        Ok(Dataset {
            x: take(&self.x),
            m: self.m.as_ref().map(&take),
            y: self.y.as_ref().map(&take),
            z: take(&self.z),
            names: self.names.clone(),
        })
    }

    /// Internal constructor for blocks that are already validated and
    /// carry the intercept column.
    pub(crate) fn from_validated_parts(
        x: Array2<f64>,
        m: Option<Array2<f64>>,
        y: Option<Array2<f64>>,
        z: Array2<f64>,
        names: BlockNames,
    ) -> Dataset {
        debug_assert!(z.column(0).iter().all(|&v| v == 1.0));
        Dataset { x, m, y, z, names }
    }
}
