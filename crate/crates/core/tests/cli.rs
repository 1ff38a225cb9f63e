use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evaluator_outliers::data::write_long;
use evaluator_outliers::fit_report::FitReport;
use evaluator_outliers::sim::{generate_dataset, SimulationScenario};
use evaluator_outliers::DetectionReport;
use tempfile::TempDir;

const SCHEMA: &str = r#"covariates = ["age", "age_sq", "very_good", "little_trouble"]"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evaluator-outliers")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a generated dataset and its schema into `dir`.
fn write_data(dir: &Path, scenario: &SimulationScenario, seed: u64) {
    let ds = generate_dataset(scenario, seed).unwrap();
    write_long(&ds, fs::File::create(dir.join("data.csv")).unwrap()).unwrap();
    fs::write(dir.join("schema.toml"), SCHEMA).unwrap();
}

fn detect(dir: &Path, extra: &[&str]) -> Output {
    let data = dir.join("data.csv");
    let schema = dir.join("schema.toml");
    let out = dir.join("out");
    let mut args = vec![
        "detect",
        "--data",
        path(&data),
        "--schema",
        path(&schema),
        "--mc-samples",
        "5000",
        "--output-dir",
        path(&out),
    ];
    args.extend_from_slice(extra);
    bin(&args)
}

fn small_outliers() -> SimulationScenario {
    SimulationScenario {
        n_significant: 2,
        n_intermediate: 0,
        ..SimulationScenario::single_outliers(2.0)
    }
}

#[test]
fn detect_finds_planted_outliers_and_plots_them() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &small_outliers(), 1);
    let o = detect(dir.path(), &["--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let report = DetectionReport::from_json(&fs::read_to_string(out.join("detection-alpha-0.05.json")).unwrap()).unwrap();
    let mut detected = report.result.detected.clone();
    detected.sort();
    assert_eq!(detected, ["1", "2"]);
    assert_eq!(report.result.k_prime, 2);

    let svg = fs::read_to_string(out.join("effects.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="effect""#).count(), 50);
    assert_eq!(svg.matches(r#"class="truncated-mean""#).count(), 1);
    assert_eq!(svg.matches(r#"class="outlier""#).count(), 2);

    let fit = FitReport::from_json(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let csv = fs::read_to_string(out.join("fit.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), fit.column_names.len());
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], fit.column_names[i]);
        assert_eq!(fields[1].parse::<f64>().unwrap(), fit.theta_hat[i]);
    }
    assert!(out.join("manifest.json").is_file());
    assert!(fs::read_to_string(out.join("detection.txt")).unwrap().contains("k' = 2"));
}

#[test]
fn null_data_detects_nothing() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &SimulationScenario::single_null(2.0), 3);
    let o = detect(dir.path(), &["--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let report = DetectionReport::from_json(&fs::read_to_string(out.join("detection-alpha-0.05.json")).unwrap()).unwrap();
    assert_eq!(report.result.k_prime, 0);
    let svg = fs::read_to_string(out.join("effects.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="outlier""#).count(), 0);
}

#[test]
fn plot_effects_rebuilds_the_plot_from_reports() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &small_outliers(), 1);
    assert!(detect(dir.path(), &["--alpha", "0.05,0.3"]).status.success());
    let out = dir.path().join("out");
    let plot_dir = dir.path().join("plot");
    let o = bin(&[
        "plot-effects",
        "--fit",
        path(&out.join("fit.json")),
        "--detection",
        path(&out.join("detection-alpha-0.05.json")),
        "--detection",
        path(&out.join("detection-alpha-0.3.json")),
        "--output-dir",
        path(&plot_dir),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(plot_dir.join("effects.svg")).unwrap();
    let at_05 = svg.matches(r#"data-alpha="0.05""#).count();
    assert_eq!(at_05, 2);
    let csv = fs::read_to_string(plot_dir.join("effects.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn mismatched_labels_exit_with_input_code() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &small_outliers(), 1);
    assert!(detect(dir.path(), &[]).status.success());
    let out = dir.path().join("out");
    let text = fs::read_to_string(out.join("detection-alpha-0.05.json")).unwrap();
    let mut report = DetectionReport::from_json(&text).unwrap();
    report.result.evaluator_labels[0] = "someone else".into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, report.to_json()).unwrap();
    let o = bin(&["plot-effects", "--fit", path(&out.join("fit.json")), "--detection", path(&bad), "--output-dir", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_column_exits_with_input_code() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &small_outliers(), 1);
    fs::write(dir.path().join("schema.toml"), r#"covariates = ["weight"]"#).unwrap();
    let o = detect(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight"));
}

#[test]
fn evaluator_level_covariate_exits_with_numerical_code() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("participant_id,evaluator_id,unit_index,outcome,site\n");
    for i in 0..40 {
        let e = i % 4;
        csv.push_str(&format!("p{i},e{e},1,{},{}\n", (i * 7 % 11) as f64, e % 2));
    }
    fs::write(dir.path().join("data.csv"), csv).unwrap();
    fs::write(dir.path().join("schema.toml"), r#"covariates = ["site"]"#).unwrap();
    let o = detect(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_alpha_exits_with_configuration_code() {
    let dir = TempDir::new().unwrap();
    write_data(dir.path(), &small_outliers(), 1);
    assert_eq!(detect(dir.path(), &["--alpha", "1.5"]).status.code(), Some(4));
    assert_eq!(detect(dir.path(), &["--mc-samples", "10"]).status.code(), Some(4));
    assert_eq!(bin(&["detect", "--bogus"]).status.code(), Some(4));
}

#[test]
fn simulate_single_replicate() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("scenario.toml");
    fs::write(&scenario, "n_significant = 2\n[detection]\nmc_samples = 2000\n").unwrap();
    let o = bin(&["simulate", "--scenario", path(&scenario), "--replicates", "1", "--output-dir", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    for f in ["simulation.json", "simulation.csv", "tables.txt", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn critical_values_for_identity_covariances() {
    let dir = TempDir::new().unwrap();
    let o = bin(&[
        "critical-values",
        "--dims",
        "1,5",
        "--alpha",
        "0.05",
        "--mc-samples",
        "100000",
        "--output-dir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("critical_values.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0][3] - 1.96).abs() < 0.03, "{:?}", rows[0]);
    assert!((rows[1][3] - 2.57).abs() < 0.03, "{:?}", rows[1]);
}

#[test]
fn missing_data_file_exits_with_input_code() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["detect", "--data", path(&dir.path().join("nope.csv")), "--output-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

