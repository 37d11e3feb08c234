//! `mmm bootstrap`: pairs-bootstrap of the indirect-effect matrix with a
//! stability index, written to bootstrap.json.

use super::{configure_threads, load_dataset, resolve_penalties, solver_options, LambdaFlags};
use crate::error::CliResult;
use crate::io::{write_json, JsonMatrix, PenaltySource};
use clap::Args;
use mmm_core::{bootstrap_indirect, stability_index, FitOptions, PenaltyConfig};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub m: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Bootstrap replicate count.
    #[arg(long, default_value_t = 10)]
    pub bootstrap_b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub lambdas: LambdaFlags,
    #[arg(long)]
    pub cv_grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Sign threshold for the stability index; defaults to
    /// 1e-8 * max|entry| across replicates.
    #[arg(long)]
    pub threshold: Option<f64>,
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
struct BootstrapFile {
    format_version: u32,
    seed: u64,
    penalties: PenaltyConfig,
    penalty_source: PenaltySource,
    requested: usize,
    completed: usize,
    failed: usize,
    threshold: f64,
    stability_index: f64,
    mean: JsonMatrix,
    sd: JsonMatrix,
    sign_agreement: JsonMatrix,
}

pub fn run(args: &BootstrapArgs) -> CliResult<()> {
    configure_threads(args.threads)?;
    let ds = load_dataset(&args.x, Some(&args.m), Some(&args.y), args.z.as_deref())?;
    let opts = FitOptions {
        solver: solver_options(args.tolerance, args.max_iterations)?,
        scale: true,
        exempt_intercept: true,
        allow_nonconverged: args.allow_nonconverged,
    };
    let (penalties, source) = resolve_penalties(
        &ds,
        &args.lambdas,
        args.cv_grid.as_ref(),
        args.folds,
        args.seed,
        &opts,
    )?;
    let result = bootstrap_indirect(&ds, &penalties, &opts, args.bootstrap_b, args.seed)?;
    let threshold = args.threshold.unwrap_or(result.threshold);
    let index = stability_index(&result, threshold);
    write_json(
        &args.out_dir.join("bootstrap.json"),
        &BootstrapFile {
            format_version: 1,
            seed: args.seed,
            penalties,
            penalty_source: source,
            requested: result.requested,
            completed: result.replicate_count(),
            failed: result.failed,
            threshold,
            stability_index: index,
            mean: JsonMatrix::from_array(&result.mean),
            sd: JsonMatrix::from_array(&result.sd),
            sign_agreement: JsonMatrix::from_array(&result.sign_agreement),
        },
    )
}
