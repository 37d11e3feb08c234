//! Many-to-many-to-many mediation analysis: two-stage elastic-net
//! estimation of a multivariate linear structural equation model, the
//! indirect-effect matrix and causal contrasts derived from it, inference
//! diagnostics, out-of-sample prediction, and a Monte Carlo simulation
//! harness.
//!
//! The model links exposures `x` (n x q) to mediators `m` (n x p) to
//! outcomes `y` (n x T), with covariates `z` (intercept first) entering
//! both equations:
//!
//! ```text
//! m = alpha' x + zeta' z + noise        y = beta' m + gamma' x + eta' z + noise
//! ```
//!
//! Fitting minimizes a penalized least-squares objective with separate
//! l1/l2 weights per stage; the mediation structure of interest is the
//! product `alpha * beta`.
//!
//! With the default `parallel` feature, independent units of work
//! (response columns, bootstrap replicates, Monte Carlo replicates,
//! cross-validation candidates) run on the rayon pool; disabling the
//! feature runs the identical code sequentially. Results are
//! byte-identical either way.

pub mod cv;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod linalg;
mod par;
pub mod predict;
pub mod rng;
pub mod scaling;
pub mod sim;
pub mod solver;
pub mod types;

pub use cv::{cv_select, default_penalty_grids, fold_assignment};
pub use dataset::{assemble_dataset, assemble_dataset_named, BlockNames, Dataset};
pub use error::{Error, Result, Stage};
pub use estimator::{
    cde, fit_mediator_stage, fit_mmm, fit_outcome_stage, global_effect, indirect_effect_matrix,
    nde, nie, path_effect, top_paths, FitOptions, MediationEffects, RankedPath,
};
pub use inference::{
    bootstrap_indirect, check_eic, ks_distance_to_standard_normal, mse_bound_beta, stability_index,
    standard_normal_cdf, standardized_beta_stat, standardized_mediation_stat, type1_rate,
    BootstrapResult, EicReport, MediationStat, NormalityStat, SupportSource,
};
pub use predict::{
    evaluate_binary, evaluate_regression, predict_mediators, predict_outcomes,
    predict_outcomes_direct, predict_outcomes_observed_m, BinaryMetrics, PredictionMode,
    PredictionResult, RegressionMetrics,
};
pub use scaling::{scale_columns, unscale_coefficients, ColumnScale, ScalingRecord};
pub use sim::{
    generate_dataset, generate_truth, matrix_correlation, nrmse, restricted_alpha_estimate,
    restricted_beta_estimate, run_cell, run_grid, Block, BlockSpec, CellPenalties, CellResult,
    GroundTruth, SimConfig, SimResult,
};
pub use solver::{
    fit_multiresponse, fit_multiresponse_with, kkt_max_excess, solve_elastic_net, SolveReport,
    SolverOptions,
};
pub use types::{CoefficientSet, ColumnDiagnostic, FitDiagnostics, PenaltyConfig};
