//! `mmm diagnose`: error-bound and irrepresentable-condition diagnostics
//! for a fitted model, plus the penalty scaling ratios.

use super::{configure_threads, load_dataset};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json, CoefficientsFile};
use clap::Args;
use mmm_core::{check_eic, mse_bound_beta, Error};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// coefficients.json from `mmm fit` (required).
    #[arg(long)]
    pub coef: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub m: PathBuf,
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// (outcome, mediator) column pairs for the EIC check, as "k,l";
    /// repeatable. Defaults to "0,0".
    #[arg(long = "eic-pair")]
    pub eic_pairs: Vec<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct MseBoundEntry {
    outcome: String,
    bound: Option<f64>,
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct EicEntry {
    outcome: usize,
    mediator: usize,
    value_beta: Option<f64>,
    value_alpha: Option<f64>,
    psi_margin: Option<f64>,
    support_beta: Option<usize>,
    support_alpha: Option<usize>,
    not_applicable: Option<String>,
}

#[derive(Debug, Serialize)]
struct LambdaRatios {
    lambda_m1_over_sqrt_n: f64,
    lambda_m2_over_n: f64,
    lambda_y1_over_sqrt_n: f64,
    lambda_y2_over_n: f64,
}

#[derive(Debug, Serialize)]
struct DiagnosticsFile {
    format_version: u32,
    n: usize,
    mse_bounds: Vec<MseBoundEntry>,
    eic: Vec<EicEntry>,
    lambda_ratios: LambdaRatios,
}

pub fn run(args: &DiagnoseArgs) -> CliResult<()> {
    configure_threads(args.threads)?;
    let file: CoefficientsFile = read_json(&args.coef)?;
    let coef = file.to_coefficient_set()?;
    let ds = load_dataset(&args.x, Some(&args.m), None, args.z.as_deref())?;
    if ds.q() != coef.q() || ds.p() != coef.p() {
        return Err(CliError::input(format!(
            "data has q={}, p={} but the fitted model expects q={}, p={}",
            ds.q(),
            ds.p(),
            coef.q(),
            coef.p()
        )));
    }
    let penalties = file.penalties;

    let mse_bounds: Vec<MseBoundEntry> = (0..coef.t())
        .map(
            |l| match mse_bound_beta(&ds, coef.beta.column(l), &penalties) {
                Ok(bound) => MseBoundEntry {
                    outcome: coef.names.outcomes[l].clone(),
                    bound: Some(bound),
                    note: None,
                },
                Err(e) => MseBoundEntry {
                    outcome: coef.names.outcomes[l].clone(),
                    bound: None,
                    note: Some(e.to_string()),
                },
            },
        )
        .collect();

    let pairs: Vec<(usize, usize)> = if args.eic_pairs.is_empty() {
        vec![(0, 0)]
    } else {
        args.eic_pairs
            .iter()
            .map(|raw| {
                let parts: Vec<&str> = raw.split(',').collect();
                if parts.len() != 2 {
                    return Err(CliError::input(format!(
                        "--eic-pair must look like \"k,l\", got \"{raw}\""
                    )));
                }
                let k = parts[0].trim().parse::<usize>();
                let l = parts[1].trim().parse::<usize>();
                match (k, l) {
                    (Ok(k), Ok(l)) => Ok((k, l)),
                    _ => Err(CliError::input(format!(
                        "--eic-pair must hold two integers, got \"{raw}\""
                    ))),
                }
            })
            .collect::<CliResult<_>>()?
    };

    let eic: Vec<EicEntry> = pairs
        .into_iter()
        .map(
            |(outcome, mediator)| match check_eic(&ds, &coef, &penalties, outcome, mediator) {
                Ok(report) => EicEntry {
                    outcome,
                    mediator,
                    value_beta: Some(report.value_beta),
                    value_alpha: Some(report.value_alpha),
                    psi_margin: Some(report.psi_margin),
                    support_beta: Some(report.support_beta),
                    support_alpha: Some(report.support_alpha),
                    not_applicable: None,
                },
                Err(e @ (Error::EmptySupport | Error::ZeroLambda1)) => EicEntry {
                    outcome,
                    mediator,
                    value_beta: None,
                    value_alpha: None,
                    psi_margin: None,
                    support_beta: None,
                    support_alpha: None,
                    not_applicable: Some(e.to_string()),
                },
                Err(e) => EicEntry {
                    outcome,
                    mediator,
                    value_beta: None,
                    value_alpha: None,
                    psi_margin: None,
                    support_beta: None,
                    support_alpha: None,
                    not_applicable: Some(e.to_string()),
                },
            },
        )
        .collect();

    let n = ds.n() as f64;
    let diagnostics = DiagnosticsFile {
        format_version: 1,
        n: ds.n(),
        mse_bounds,
        eic,
        lambda_ratios: LambdaRatios {
            lambda_m1_over_sqrt_n: penalties.lambda_m1 / n.sqrt(),
            lambda_m2_over_n: penalties.lambda_m2 / n,
            lambda_y1_over_sqrt_n: penalties.lambda_y1 / n.sqrt(),
            lambda_y2_over_n: penalties.lambda_y2 / n,
        },
    };
    write_json(&args.out_dir.join("diagnostics.json"), &diagnostics)
}
