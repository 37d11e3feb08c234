//! Penalty configuration and fitted-coefficient containers.

use crate::dataset::BlockNames;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// The four tuning parameters of the penalized objective: l1/l2 weights
/// for the mediator-stage and outcome-stage regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda_m1: f64,
    pub lambda_m2: f64,
    pub lambda_y1: f64,
    pub lambda_y2: f64,
}

impl PenaltyConfig {
    pub fn new(lambda_m1: f64, lambda_m2: f64, lambda_y1: f64, lambda_y2: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda_m1", lambda_m1),
            ("lambda_m2", lambda_m2),
            ("lambda_y1", lambda_y1),
            ("lambda_y2", lambda_y2),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(PenaltyConfig {
            lambda_m1,
            lambda_m2,
            lambda_y1,
            lambda_y2,
        })
    }

    /// Uniform penalty across both stages, mostly for tests.
    pub fn uniform(lambda1: f64, lambda2: f64) -> Result<Self> {
        PenaltyConfig::new(lambda1, lambda2, lambda1, lambda2)
    }
}

/// Per-response-column solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDiagnostic {
    pub column: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub mediator_stage: Vec<ColumnDiagnostic>,
    pub outcome_stage: Vec<ColumnDiagnostic>,
}

/// The five fitted coefficient matrices of the linear structural equation
/// model, always expressed on the original data scale.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    /// Exposure -> mediator, q x p.
    pub alpha: Array2<f64>,
    /// Covariate -> mediator, s x p.
    pub zeta: Array2<f64>,
    /// Mediator -> outcome, p x T.
    pub beta: Array2<f64>,
    /// Exposure -> outcome (direct), q x T.
    pub gamma: Array2<f64>,
    /// Covariate -> outcome, s x T.
    pub eta: Array2<f64>,
    pub diagnostics: FitDiagnostics,
    pub names: BlockNames,
}

impl CoefficientSet {
    pub fn new(
        alpha: Array2<f64>,
        zeta: Array2<f64>,
        beta: Array2<f64>,
        gamma: Array2<f64>,
        eta: Array2<f64>,
        diagnostics: FitDiagnostics,
        names: BlockNames,
    ) -> Result<Self> {
        let set = CoefficientSet {
            alpha,
            zeta,
            beta,
            gamma,
            eta,
            diagnostics,
            names,
        };
        set.validate()?;
        Ok(set)
    }

    /// Construct from bare matrices with generated names; used throughout
    /// tests and the simulation harness.
    pub fn from_matrices(
        alpha: Array2<f64>,
        zeta: Array2<f64>,
        beta: Array2<f64>,
        gamma: Array2<f64>,
        eta: Array2<f64>,
    ) -> Result<Self> {
        let names = BlockNames::generated(alpha.nrows(), alpha.ncols(), beta.ncols(), zeta.nrows());
        CoefficientSet::new(
            alpha,
            zeta,
            beta,
            gamma,
            eta,
            FitDiagnostics::default(),
            names,
        )
    }

    pub fn q(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn p(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn t(&self) -> usize {
        self.beta.ncols()
    }

    pub fn s(&self) -> usize {
        self.zeta.nrows()
    }

    fn validate(&self) -> Result<()> {
        let (q, p, t, s) = (self.q(), self.p(), self.t(), self.s());
        let checks = [
            ("zeta", self.zeta.dim(), (s, p)),
            ("beta", self.beta.dim(), (p, t)),
            ("gamma", self.gamma.dim(), (q, t)),
            ("eta", self.eta.dim(), (s, t)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        for (name, m) in [
            ("alpha", &self.alpha),
            ("zeta", &self.zeta),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("eta", &self.eta),
        ] {
            for ((row, col), v) in m.indexed_iter() {
                if !v.is_finite() {
                    return Err(Error::ShapeMismatch(format!(
                        "{name}[{row},{col}] is not finite"
                    )));
                }
            }
        }
        Ok(())
    }
}
