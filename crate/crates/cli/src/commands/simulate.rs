//! `mmm simulate`: the (n, sigma) Monte Carlo grid, writing
//! grid_results.csv, qq_samples.csv and truth.json.

use super::{configure_threads, parse_list, solver_options, LambdaFlags};
use crate::error::{CliError, CliResult};
use crate::io::{atomic_write, read_json, write_json, GridFile, JsonMatrix};
use clap::Args;
use mmm_core::{
    generate_truth, run_grid, BlockSpec, CellPenalties, CellResult, FitOptions, SimConfig,
};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated sample sizes, e.g. 100,1000,10000.
    #[arg(long)]
    pub n_list: String,
    /// Comma-separated noise scales, e.g. 50,100,500.
    #[arg(long)]
    pub sigma_list: String,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub q: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    /// Outcome count.
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    /// Substantive covariates (the intercept is added internally).
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Override the alpha/beta block magnitude.
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Null-mediation configuration (no alpha/beta blocks).
    #[arg(long)]
    pub null_truth: bool,
    /// Threshold for Type-I rates on null entries.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Bootstrap replicates for the per-cell stability index (0 skips).
    #[arg(long, default_value_t = 10)]
    pub bootstrap_b: usize,
    #[command(flatten)]
    pub lambdas: LambdaFlags,
    #[arg(long)]
    pub cv_grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Serialize)]
struct TruthFile {
    format_version: u32,
    seed: u64,
    block_spec: BlockSpec,
    alpha0: JsonMatrix,
    beta0: JsonMatrix,
    gamma0: JsonMatrix,
    zeta0: JsonMatrix,
    eta0: JsonMatrix,
    indirect0: JsonMatrix,
}

fn mean_opt(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

fn push_metric(out: &mut String, n: usize, sigma: f64, metric: &str, value: Option<f64>) {
    let rendered = match value {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => "NA".to_string(),
    };
    out.push_str(&format!("{n},{sigma},{metric},{rendered}\n"));
}

fn cell_rows(out: &mut String, cell: &CellResult) {
    let (n, sigma) = (cell.n, cell.sigma);
    let mean_err = |v: &[mmm_core::sim::ErrorMetric]| -> Option<f64> {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().map(|m| m.value).sum::<f64>() / v.len() as f64)
        }
    };
    push_metric(
        out,
        n,
        sigma,
        "replicates_ok",
        Some(cell.nrmse_alpha.len() as f64),
    );
    push_metric(
        out,
        n,
        sigma,
        "replicates_failed",
        Some(cell.failures.len() as f64),
    );
    push_metric(out, n, sigma, "lambda_m1", Some(cell.penalties.lambda_m1));
    push_metric(out, n, sigma, "lambda_m2", Some(cell.penalties.lambda_m2));
    push_metric(out, n, sigma, "lambda_y1", Some(cell.penalties.lambda_y1));
    push_metric(out, n, sigma, "lambda_y2", Some(cell.penalties.lambda_y2));
    push_metric(
        out,
        n,
        sigma,
        "nrmse_alpha_median",
        Some(CellResult::median_nrmse(&cell.nrmse_alpha)),
    );
    push_metric(
        out,
        n,
        sigma,
        "nrmse_beta_median",
        Some(CellResult::median_nrmse(&cell.nrmse_beta)),
    );
    push_metric(
        out,
        n,
        sigma,
        "nrmse_indirect_median",
        Some(CellResult::median_nrmse(&cell.nrmse_indirect)),
    );
    push_metric(
        out,
        n,
        sigma,
        "nrmse_alpha_mean",
        mean_err(&cell.nrmse_alpha),
    );
    push_metric(out, n, sigma, "nrmse_beta_mean", mean_err(&cell.nrmse_beta));
    push_metric(
        out,
        n,
        sigma,
        "nrmse_indirect_mean",
        mean_err(&cell.nrmse_indirect),
    );
    push_metric(out, n, sigma, "corr_alpha_mean", mean_opt(&cell.corr_alpha));
    push_metric(out, n, sigma, "corr_beta_mean", mean_opt(&cell.corr_beta));
    push_metric(
        out,
        n,
        sigma,
        "corr_indirect_mean",
        mean_opt(&cell.corr_indirect),
    );
    push_metric(
        out,
        n,
        sigma,
        "type1_alpha_mean",
        mean_opt(&cell.type1_alpha),
    );
    push_metric(out, n, sigma, "type1_beta_mean", mean_opt(&cell.type1_beta));
    push_metric(out, n, sigma, "stability", cell.stability);
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    configure_threads(args.threads)?;
    let n_list: Vec<usize> = parse_list(&args.n_list, "--n-list")?;
    let sigma_list: Vec<f64> = parse_list(&args.sigma_list, "--sigma-list")?;

    let mut block_spec = if args.null_truth {
        BlockSpec::null()
    } else {
        BlockSpec::default()
    };
    if let Some(magnitude) = args.magnitude {
        block_spec = block_spec.with_magnitude(magnitude);
    }
    let cfg = SimConfig {
        n: *n_list
            .first()
            .ok_or_else(|| CliError::input("--n-list is empty"))?,
        q: args.q,
        p: args.p,
        t: args.t,
        s: args.s,
        sigma: *sigma_list
            .first()
            .ok_or_else(|| CliError::input("--sigma-list is empty"))?,
        rho: args.rho,
        seed: args.seed,
        block_spec,
        type1_threshold: args.threshold,
        stability_replicates: args.bootstrap_b,
    };
    cfg.validate().map_err(CliError::from)?;
    let truth = generate_truth(&cfg)?;

    let penalties = match args.lambdas.fixed()? {
        Some(fixed) => CellPenalties::Fixed(fixed),
        None => {
            let (grid_m, grid_y) = match &args.cv_grid {
                Some(path) => {
                    let file: GridFile = read_json(path)?;
                    (Some(file.grid_m), Some(file.grid_y))
                }
                None => (None, None),
            };
            CellPenalties::CrossValidated {
                grid_m,
                grid_y,
                folds: args.folds,
            }
        }
    };
    let opts = FitOptions {
        solver: solver_options(args.tolerance, args.max_iterations)?,
        scale: true,
        exempt_intercept: true,
        allow_nonconverged: args.allow_nonconverged,
    };

    let result = run_grid(
        &truth,
        &cfg,
        &n_list,
        &sigma_list,
        &penalties,
        args.replicates,
        &opts,
    )?;

    write_json(
        &args.out_dir.join("truth.json"),
        &TruthFile {
            format_version: 1,
            seed: args.seed,
            block_spec: cfg.block_spec.clone(),
            alpha0: JsonMatrix::from_array(&truth.alpha0),
            beta0: JsonMatrix::from_array(&truth.beta0),
            gamma0: JsonMatrix::from_array(&truth.gamma0),
            zeta0: JsonMatrix::from_array(&truth.zeta0),
            eta0: JsonMatrix::from_array(&truth.eta0),
            indirect0: JsonMatrix::from_array(&truth.indirect0),
        },
    )?;

    let mut grid_csv = String::from("n,sigma,metric,value\n");
    let mut qq_csv = String::from("n,sigma,replicate,value\n");
    for record in &result.cells {
        match &record.result {
            Some(cell) => {
                cell_rows(&mut grid_csv, cell);
                for (i, v) in cell.qq_samples.iter().enumerate() {
                    qq_csv.push_str(&format!("{},{},{},{}\n", cell.n, cell.sigma, i, v));
                }
            }
            None => {
                push_metric(&mut grid_csv, record.n, record.sigma, "aborted", Some(1.0));
            }
        }
    }
    atomic_write(&args.out_dir.join("grid_results.csv"), grid_csv.as_bytes())?;
    atomic_write(&args.out_dir.join("qq_samples.csv"), qq_csv.as_bytes())?;

    let aborted = result.aborted_cells();
    if aborted > 0 {
        let first = result
            .cells
            .iter()
            .find_map(|c| c.error.as_ref())
            .cloned()
            .unwrap_or_default();
        return Err(CliError::Simulation(format!(
            "{aborted} grid cell(s) aborted; first error: {first}"
        )));
    }
    Ok(())
}
