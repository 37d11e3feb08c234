//! Exit-code and output-format behaviors of the `mmm` binary beyond the
//! acceptance criteria.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mmm-cli-behaviors-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_mmm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mmm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fit_fixture_args<'a>(out: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "fit".into(),
        "--x".into(),
        fixture("x.csv").to_str().unwrap().into(),
        "--m".into(),
        fixture("m.csv").to_str().unwrap().into(),
        "--y".into(),
        fixture("y.csv").to_str().unwrap().into(),
        "--z".into(),
        fixture("z.csv").to_str().unwrap().into(),
        "--seed".into(),
        "5".into(),
        "--out-dir".into(),
        out.to_str().unwrap().into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

#[test]
fn nonconvergence_exits_3_unless_allowed() {
    let out = temp_dir("exit3");
    // one sweep cannot converge at this tolerance on correlated data
    let args = fit_fixture_args(
        &out,
        &[
            "--max-iterations",
            "1",
            "--tolerance",
            "1e-14",
            "--lambda-m1",
            "0.1",
            "--lambda-m2",
            "0.1",
            "--lambda-y1",
            "0.1",
            "--lambda-y2",
            "0.1",
        ],
    );
    let strict = run_mmm(&args.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(
        strict.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&strict.stderr)
    );

    let mut allowed_args = args;
    allowed_args.push("--allow-nonconverged".into());
    let allowed = run_mmm(&allowed_args.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert!(
        allowed.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&allowed.stderr)
    );
    let coef: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("coefficients.json")).unwrap()).unwrap();
    // diagnostics must record the non-converged columns honestly
    let any_nonconverged = coef["diagnostics"]["mediator_stage"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["converged"] == false);
    assert!(any_nonconverged);
}

#[test]
fn missing_input_file_exits_2() {
    let out = temp_dir("exit2");
    let result = run_mmm(&[
        "fit",
        "--x",
        "/nonexistent/x.csv",
        "--m",
        fixture("m.csv").to_str().unwrap(),
        "--y",
        fixture("y.csv").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn aborted_simulation_cell_exits_4() {
    let out = temp_dir("exit4");
    // n = 4 cannot support 5-fold cross-validation, so the cell aborts
    let result = run_mmm(&[
        "simulate",
        "--n-list",
        "4",
        "--sigma-list",
        "10",
        "--replicates",
        "1",
        "--folds",
        "5",
        "--bootstrap-b",
        "0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        result.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    // outputs are still written with the abort recorded
    let grid = std::fs::read_to_string(out.join("grid_results.csv")).unwrap();
    assert!(grid.contains("aborted"));
}

#[test]
fn bootstrap_writes_summary_json() {
    let out = temp_dir("boot");
    let result = run_mmm(&[
        "bootstrap",
        "--x",
        fixture("x.csv").to_str().unwrap(),
        "--m",
        fixture("m.csv").to_str().unwrap(),
        "--y",
        fixture("y.csv").to_str().unwrap(),
        "--z",
        fixture("z.csv").to_str().unwrap(),
        "--bootstrap-b",
        "4",
        "--seed",
        "9",
        "--lambda-m1",
        "1",
        "--lambda-m2",
        "0.5",
        "--lambda-y1",
        "1",
        "--lambda-y2",
        "0.5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let boot: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("bootstrap.json")).unwrap()).unwrap();
    assert_eq!(boot["format_version"], 1);
    assert_eq!(boot["completed"], 4);
    let idx = boot["stability_index"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&idx));
    assert_eq!(boot["mean"]["rows"], 5);
    assert_eq!(boot["mean"]["cols"], 3);
}

#[test]
fn diagnose_reports_bounds_eic_and_lambda_ratios() {
    let out = temp_dir("diag");
    let fit = run_mmm(
        &fit_fixture_args(
            &out,
            &[
                "--lambda-m1",
                "2.0",
                "--lambda-m2",
                "1.0",
                "--lambda-y1",
                "3.0",
                "--lambda-y2",
                "1.5",
            ],
        )
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>(),
    );
    assert!(fit.status.success());

    let coef_path = out.join("coefficients.json");
    let result = run_mmm(&[
        "diagnose",
        "--coef",
        coef_path.to_str().unwrap(),
        "--x",
        fixture("x.csv").to_str().unwrap(),
        "--m",
        fixture("m.csv").to_str().unwrap(),
        "--eic-pair",
        "0,0",
        "--eic-pair",
        "1,1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["format_version"], 1);
    // ratios echo the penalties against this n = 50 fixture
    let n = 50.0f64;
    let got = diag["lambda_ratios"]["lambda_y1_over_sqrt_n"]
        .as_f64()
        .unwrap();
    assert!((got - 3.0 / n.sqrt()).abs() < 1e-12);
    let got = diag["lambda_ratios"]["lambda_m2_over_n"].as_f64().unwrap();
    assert!((got - 1.0 / n).abs() < 1e-12);
    // a bound for every outcome, all positive
    let bounds = diag["mse_bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 3);
    for b in bounds {
        assert!(b["bound"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(diag["eic"].as_array().unwrap().len(), 2);

    // missing fitted-model input exits 2
    let missing = run_mmm(&[
        "diagnose",
        "--coef",
        "/nonexistent/coefficients.json",
        "--x",
        fixture("x.csv").to_str().unwrap(),
        "--m",
        fixture("m.csv").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn predict_observed_and_direct_modes() {
    let out = temp_dir("modes");
    let fit = run_mmm(
        &fit_fixture_args(&out, &[])
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>(),
    );
    assert!(fit.status.success());
    let coef = out.join("coefficients.json");

    let observed = run_mmm(&[
        "predict",
        "--coef",
        coef.to_str().unwrap(),
        "--x",
        fixture("x.csv").to_str().unwrap(),
        "--z",
        fixture("z.csv").to_str().unwrap(),
        "--m",
        fixture("m.csv").to_str().unwrap(),
        "--mode",
        "observed",
        "--truth",
        fixture("y.csv").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(
        observed.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&observed.stderr)
    );

    let direct_out = temp_dir("modes-direct");
    let direct = run_mmm(&[
        "predict",
        "--coef",
        coef.to_str().unwrap(),
        "--x",
        fixture("x.csv").to_str().unwrap(),
        "--z",
        fixture("z.csv").to_str().unwrap(),
        "--mode",
        "direct",
        "--out-dir",
        direct_out.to_str().unwrap(),
    ]);
    assert!(direct.status.success());
    // the direct baseline has no mediator file to write
    assert!(!direct_out.join("predicted_mediators.csv").exists());
    assert!(direct_out.join("predicted_outcomes.csv").exists());
}
