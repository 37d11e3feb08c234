//! `mmm predict`: out-of-sample prediction from a fitted model, with
//! optional evaluation against observed outcomes.

use super::{configure_threads, parse_list};
use crate::error::{CliError, CliResult};
use crate::io::{read_csv_matrix, read_json, write_csv_matrix, write_json, CoefficientsFile};
use clap::{Args, ValueEnum};
use mmm_core::{
    evaluate_binary, evaluate_regression, predict_outcomes, predict_outcomes_direct,
    predict_outcomes_observed_m, CoefficientSet,
};
use ndarray::Array2;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Two-step prediction through predicted mediators (default).
    Mediated,
    /// Use observed mediators from --m.
    Observed,
    /// Direct model only (x gamma + z eta).
    Direct,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// coefficients.json from `mmm fit`.
    #[arg(long)]
    pub coef: PathBuf,
    /// New exposure CSV; headers must match the training exposures.
    #[arg(long)]
    pub x: PathBuf,
    /// New covariate CSV (required when the model was fit with
    /// covariates).
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Observed mediator CSV for --mode observed.
    #[arg(long)]
    pub m: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Mediated)]
    pub mode: Mode,
    /// Observed outcome CSV; enables metrics.json.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Classification threshold for binary outcome columns.
    #[arg(long, default_value_t = 0.5)]
    pub cut: f64,
    /// Comma-separated outcome names to evaluate as binary; by default
    /// any truth column whose values are all 0/1.
    #[arg(long)]
    pub binary_outcomes: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn check_headers(kind: &str, got: &[String], want: &[String]) -> CliResult<()> {
    if got != want {
        return Err(CliError::input(format!(
            "{kind} headers do not match the training data: got [{}], expected [{}]",
            got.join(", "),
            want.join(", ")
        )));
    }
    Ok(())
}

fn load_new_data(
    args: &PredictArgs,
    coef: &CoefficientSet,
) -> CliResult<(Array2<f64>, Array2<f64>)> {
    let x_csv = read_csv_matrix(&args.x)?;
    check_headers("exposure", &x_csv.headers, &coef.names.exposures)?;
    let n = x_csv.values.nrows();
    let want_covariates = &coef.names.covariates[1..];
    let z = match (&args.z, want_covariates.is_empty()) {
        (None, true) => Array2::<f64>::ones((n, 1)),
        (None, false) => {
            return Err(CliError::input(format!(
                "the model was fit with covariates [{}]; provide --z",
                want_covariates.join(", ")
            )))
        }
        (Some(path), _) => {
            let z_csv = read_csv_matrix(path)?;
            check_headers("covariate", &z_csv.headers, want_covariates)?;
            if z_csv.values.nrows() != n {
                return Err(CliError::input(format!(
                    "covariate rows ({}) do not match exposure rows ({n})",
                    z_csv.values.nrows()
                )));
            }
            let mut z = Array2::<f64>::ones((n, z_csv.values.ncols() + 1));
            z.slice_mut(ndarray::s![.., 1..]).assign(&z_csv.values);
            z
        }
    };
    Ok((x_csv.values, z))
}

#[derive(Debug, Serialize)]
struct RegressionEntry {
    outcome: String,
    rmse: f64,
    correlation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BinaryEntry {
    outcome: String,
    cut: f64,
    accuracy: f64,
    auc: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    format_version: u32,
    mode: String,
    regression: Vec<RegressionEntry>,
    binary: Vec<BinaryEntry>,
}

pub fn run(args: &PredictArgs) -> CliResult<()> {
    configure_threads(args.threads)?;
    let file: CoefficientsFile = read_json(&args.coef)?;
    let coef = file.to_coefficient_set()?;
    let (x, z) = load_new_data(args, &coef)?;

    let result = match args.mode {
        Mode::Mediated => predict_outcomes(&coef, x.view(), z.view())?,
        Mode::Observed => {
            let m_path = args.m.as_ref().ok_or_else(|| {
                CliError::input("--mode observed requires --m with observed mediators")
            })?;
            let m_csv = read_csv_matrix(m_path)?;
            check_headers("mediator", &m_csv.headers, &coef.names.mediators)?;
            predict_outcomes_observed_m(&coef, m_csv.values.view(), x.view(), z.view())?
        }
        Mode::Direct => predict_outcomes_direct(&coef, x.view(), z.view())?,
    };

    if let Some(mediators) = &result.mediators {
        write_csv_matrix(
            &args.out_dir.join("predicted_mediators.csv"),
            &coef.names.mediators,
            mediators,
        )?;
    }
    write_csv_matrix(
        &args.out_dir.join("predicted_outcomes.csv"),
        &coef.names.outcomes,
        &result.outcomes,
    )?;

    if let Some(truth_path) = &args.truth {
        let truth_csv = read_csv_matrix(truth_path)?;
        check_headers("outcome", &truth_csv.headers, &coef.names.outcomes)?;
        if truth_csv.values.dim() != result.outcomes.dim() {
            return Err(CliError::input(format!(
                "truth outcomes are {:?}, predictions are {:?}",
                truth_csv.values.dim(),
                result.outcomes.dim()
            )));
        }
        let metrics = evaluate_regression(result.outcomes.view(), truth_csv.values.view())?;
        let regression: Vec<RegressionEntry> = metrics
            .iter()
            .enumerate()
            .map(|(l, m)| RegressionEntry {
                outcome: coef.names.outcomes[l].clone(),
                rmse: m.rmse,
                correlation: m.correlation,
            })
            .collect();

        let requested_binary: Option<Vec<String>> = args
            .binary_outcomes
            .as_ref()
            .map(|list| parse_list::<String>(list, "binary outcome"))
            .transpose()?;
        let mut binary = Vec::new();
        for l in 0..coef.t() {
            let name = &coef.names.outcomes[l];
            let column = truth_csv.values.column(l);
            let is_binary = column.iter().all(|&v| v == 0.0 || v == 1.0);
            let wanted = match &requested_binary {
                Some(names) => names.contains(name),
                None => is_binary,
            };
            if !wanted {
                continue;
            }
            if !is_binary {
                return Err(CliError::input(format!(
                    "outcome {name} requested as binary but has non-0/1 values"
                )));
            }
            let m = evaluate_binary(result.outcomes.column(l), column, args.cut)?;
            binary.push(BinaryEntry {
                outcome: name.clone(),
                cut: args.cut,
                accuracy: m.accuracy,
                auc: m.auc,
            });
        }
        let file = MetricsFile {
            format_version: 1,
            mode: format!("{:?}", result.mode).to_lowercase(),
            regression,
            binary,
        };
        write_json(&args.out_dir.join("metrics.json"), &file)?;
    }
    Ok(())
}
