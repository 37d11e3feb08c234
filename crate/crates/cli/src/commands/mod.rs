//! Shared command plumbing: dataset loading, penalty resolution, thread
//! pool setup.

pub mod bootstrap;
pub mod diagnose;
pub mod fit;
pub mod predict;
pub mod simulate;

use crate::error::{CliError, CliResult};
use crate::io::{read_csv_matrix, read_json, GridFile};
use mmm_core::{
    assemble_dataset_named, cv_select, default_penalty_grids, BlockNames, Dataset, FitOptions,
    PenaltyConfig, SolverOptions,
};
use std::path::{Path, PathBuf};

/// Initialize the global rayon pool from --threads or MMM_THREADS.
pub fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let from_env = std::env::var("MMM_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| CliError::input(format!("MMM_THREADS must be an integer, got {v}")))
        })
        .transpose()?;
    if let Some(count) = threads.or(from_env) {
        if count == 0 {
            return Err(CliError::input("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

/// Load and assemble a dataset from CSV paths, carrying CSV headers as
/// column names.
pub fn load_dataset(
    x: &Path,
    m: Option<&Path>,
    y: Option<&Path>,
    z: Option<&Path>,
) -> CliResult<Dataset> {
    let x_csv = read_csv_matrix(x)?;
    let m_csv = m.map(read_csv_matrix).transpose()?;
    let y_csv = y.map(read_csv_matrix).transpose()?;
    let z_csv = z.map(read_csv_matrix).transpose()?;
    let names = BlockNames {
        exposures: x_csv.headers.clone(),
        mediators: m_csv
            .as_ref()
            .map(|c| c.headers.clone())
            .unwrap_or_default(),
        outcomes: y_csv
            .as_ref()
            .map(|c| c.headers.clone())
            .unwrap_or_default(),
        covariates: z_csv
            .as_ref()
            .map(|c| c.headers.clone())
            .unwrap_or_default(),
    };
    assemble_dataset_named(
        x_csv.values,
        m_csv.map(|c| c.values),
        y_csv.map(|c| c.values),
        z_csv.map(|c| c.values),
        Some(names),
    )
    .map_err(CliError::from)
}

/// The four --lambda-* flags: all four given means a fixed configuration,
/// none means cross-validation, anything else is an error.
#[derive(Debug, Clone, Copy, clap::Args)]
pub struct LambdaFlags {
    /// Mediator-stage l1 weight (bypasses CV; give all four).
    #[arg(long)]
    pub lambda_m1: Option<f64>,
    /// Mediator-stage l2 weight.
    #[arg(long)]
    pub lambda_m2: Option<f64>,
    /// Outcome-stage l1 weight.
    #[arg(long)]
    pub lambda_y1: Option<f64>,
    /// Outcome-stage l2 weight.
    #[arg(long)]
    pub lambda_y2: Option<f64>,
}

impl LambdaFlags {
    pub fn fixed(&self) -> CliResult<Option<PenaltyConfig>> {
        let given = [
            self.lambda_m1,
            self.lambda_m2,
            self.lambda_y1,
            self.lambda_y2,
        ];
        if given.iter().all(|v| v.is_none()) {
            return Ok(None);
        }
        if given.iter().any(|v| v.is_none()) {
            return Err(CliError::input(
                "either give all of --lambda-m1/--lambda-m2/--lambda-y1/--lambda-y2 or none",
            ));
        }
        PenaltyConfig::new(
            self.lambda_m1.unwrap(),
            self.lambda_m2.unwrap(),
            self.lambda_y1.unwrap(),
            self.lambda_y2.unwrap(),
        )
        .map(Some)
        .map_err(CliError::from)
    }
}

/// Resolve the penalty configuration for a fit-style command, running
/// cross-validation when no fixed lambdas were given.
pub fn resolve_penalties(
    ds: &Dataset,
    lambdas: &LambdaFlags,
    cv_grid: Option<&PathBuf>,
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> CliResult<(PenaltyConfig, crate::io::PenaltySource)> {
    if let Some(fixed) = lambdas.fixed()? {
        return Ok((fixed, crate::io::PenaltySource::Fixed));
    }
    let (grid_m, grid_y) = match cv_grid {
        Some(path) => {
            let file: GridFile = read_json(path)?;
            (file.grid_m, file.grid_y)
        }
        None => default_penalty_grids(ds)?,
    };
    let picked = cv_select(ds, &grid_m, &grid_y, folds, seed, opts)?;
    Ok((picked, crate::io::PenaltySource::CrossValidated))
}

pub fn solver_options(tolerance: f64, max_iterations: usize) -> CliResult<SolverOptions> {
    if tolerance <= 0.0 {
        return Err(CliError::input("--tolerance must be positive"));
    }
    Ok(SolverOptions {
        tolerance,
        max_iterations,
        ..SolverOptions::default()
    })
}

/// Parse a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(input: &str, what: &str) -> CliResult<Vec<T>> {
    input
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CliError::input(format!("cannot parse {what} entry \"{s}\"")))
        })
        .collect()
}
