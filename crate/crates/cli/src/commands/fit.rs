//! `mmm fit`: two-stage fit from CSV inputs, writing coefficients.json,
//! indirect.csv and paths.csv.

use super::{configure_threads, load_dataset, resolve_penalties, solver_options, LambdaFlags};
use crate::error::CliResult;
use crate::io::{write_json, CoefficientsFile, JsonMatrix};
use clap::Args;
use mmm_core::{
    fit_mmm, indirect_effect_matrix, scale_columns, top_paths, FitOptions, MediationEffects,
    ScalingRecord,
};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Exposure CSV (n rows, q columns, header row).
    #[arg(long)]
    pub x: PathBuf,
    /// Mediator CSV.
    #[arg(long)]
    pub m: PathBuf,
    /// Outcome CSV.
    #[arg(long)]
    pub y: PathBuf,
    /// Covariate CSV (without the intercept column).
    #[arg(long)]
    pub z: Option<PathBuf>,
    #[command(flatten)]
    pub lambdas: LambdaFlags,
    /// JSON file with cross-validation grids ({"grid_m": [[l1,l2],...], "grid_y": ...}).
    #[arg(long)]
    pub cv_grid: Option<PathBuf>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (falls back to MMM_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Keep per-column fits that hit the iteration cap instead of
    /// exiting 3.
    #[arg(long)]
    pub allow_nonconverged: bool,
    /// Skip the column normalization of x and m before solving.
    #[arg(long)]
    pub no_scale: bool,
    /// Penalize the intercept as the objective is written; by default the
    /// CLI exempts it.
    #[arg(long)]
    pub penalize_intercept: bool,
    /// Solver tolerance on the max coefficient change per sweep.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
    /// Number of strongest pathways written to paths.csv.
    #[arg(long, default_value_t = 100)]
    pub top_paths: usize,
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    configure_threads(args.threads)?;
    let ds = load_dataset(&args.x, Some(&args.m), Some(&args.y), args.z.as_deref())?;
    let opts = FitOptions {
        solver: solver_options(args.tolerance, args.max_iterations)?,
        scale: !args.no_scale,
        exempt_intercept: !args.penalize_intercept,
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
    let coef = fit_mmm(&ds, &penalties, &opts)?;
    let scaling_record = if opts.scale {
        scale_columns(&ds)?.1
    } else {
        ScalingRecord::identity(ds.q(), ds.p())
    };

    let file = CoefficientsFile {
        format_version: 1,
        n: ds.n(),
        penalties,
        penalty_source: source,
        seed: args.seed,
        scaled: opts.scale,
        exempt_intercept: opts.exempt_intercept,
        column_names: coef.names.clone(),
        alpha: JsonMatrix::from_array(&coef.alpha),
        zeta: JsonMatrix::from_array(&coef.zeta),
        beta: JsonMatrix::from_array(&coef.beta),
        gamma: JsonMatrix::from_array(&coef.gamma),
        eta: JsonMatrix::from_array(&coef.eta),
        scaling_record,
        diagnostics: coef.diagnostics.clone(),
    };
    write_json(&args.out_dir.join("coefficients.json"), &file)?;

    // indirect.csv: exposure label column plus one column per outcome
    let indirect = indirect_effect_matrix(&coef);
    let mut headers = vec!["exposure".to_string()];
    headers.extend(coef.names.outcomes.iter().cloned());
    let mut csv = headers.join(",");
    csv.push('\n');
    for (j, row) in indirect.rows().into_iter().enumerate() {
        csv.push_str(&coef.names.exposures[j]);
        for v in row {
            csv.push(',');
            csv.push_str(&format!("{v}"));
        }
        csv.push('\n');
    }
    crate::io::atomic_write(&args.out_dir.join("indirect.csv"), csv.as_bytes())?;

    let effects = MediationEffects::from_coefficients(&coef);
    let ranked = top_paths(&effects, args.top_paths);
    let mut paths_csv = String::from("exposure,mediator,outcome,value\n");
    for p in &ranked {
        paths_csv.push_str(&format!(
            "{},{},{},{}\n",
            coef.names.exposures[p.exposure],
            coef.names.mediators[p.mediator],
            coef.names.outcomes[p.outcome],
            p.value
        ));
    }
    crate::io::atomic_write(&args.out_dir.join("paths.csv"), paths_csv.as_bytes())?;
    Ok(())
}
