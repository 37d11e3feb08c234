//! File formats.
//!
//! CSV: UTF-8, comma-delimited, one header row, no index column; floats
//! serialized as the shortest round-trip decimal. JSON: serde structs
//! with fixed key order; matrices are row-major nested arrays with
//! explicit `rows`/`cols`. Every writer goes through a
//! write-to-temp-then-rename so output files are never half-written.

use crate::error::{CliError, CliResult};
use mmm_core::{BlockNames, CoefficientSet, FitDiagnostics, PenaltyConfig, ScalingRecord};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string()),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A parsed numeric CSV: header row plus an n x d matrix.
#[derive(Debug)]
pub struct CsvMatrix {
    pub headers: Vec<String>,
    pub values: Array2<f64>,
}

pub fn read_csv_matrix(path: &Path) -> CliResult<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        return Err(CliError::input(format!(
            "{}: no header columns",
            path.display()
        )));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut row_count = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::input(format!(
                "{}: line {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{}: line {}, column {} ({}): cannot parse \"{}\" as a number",
                    path.display(),
                    i + 2,
                    j + 1,
                    headers[j],
                    field
                ))
            })?;
            rows.push(value);
        }
        row_count += 1;
    }
    if row_count == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let values = Array2::from_shape_vec((row_count, headers.len()), rows)
        .expect("shape follows from construction");
    Ok(CsvMatrix { headers, values })
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_csv_matrix(path: &Path, headers: &[String], values: &Array2<f64>) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Row-major nested-array matrix representation shared by all JSON files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl JsonMatrix {
    pub fn from_array(a: &Array2<f64>) -> Self {
        JsonMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn to_array(&self) -> CliResult<Array2<f64>> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(CliError::input(
                "matrix data does not match declared rows/cols".to_string(),
            ));
        }
        let flat: Vec<f64> = self.data.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.rows, self.cols), flat)
            .map_err(|e| CliError::input(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySource {
    Fixed,
    CrossValidated,
}

/// The coefficients.json schema.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoefficientsFile {
    pub format_version: u32,
    pub n: usize,
    pub penalties: PenaltyConfig,
    pub penalty_source: PenaltySource,
    pub seed: u64,
    pub scaled: bool,
    pub exempt_intercept: bool,
    pub column_names: BlockNames,
    pub alpha: JsonMatrix,
    pub zeta: JsonMatrix,
    pub beta: JsonMatrix,
    pub gamma: JsonMatrix,
    pub eta: JsonMatrix,
    pub scaling_record: ScalingRecord,
    pub diagnostics: FitDiagnostics,
}

impl CoefficientsFile {
    pub fn to_coefficient_set(&self) -> CliResult<CoefficientSet> {
        if self.format_version != 1 {
            return Err(CliError::input(format!(
                "unsupported coefficients format_version {}",
                self.format_version
            )));
        }
        CoefficientSet::new(
            self.alpha.to_array()?,
            self.zeta.to_array()?,
            self.beta.to_array()?,
            self.gamma.to_array()?,
            self.eta.to_array()?,
            self.diagnostics.clone(),
            self.column_names.clone(),
        )
        .map_err(CliError::from)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Penalty-grid file: `{"grid_m": [[l1, l2], ...], "grid_y": [...]}`.
#[derive(Debug, Deserialize)]
pub struct GridFile {
    pub grid_m: Vec<(f64, f64)>,
    pub grid_y: Vec<(f64, f64)>,
}
