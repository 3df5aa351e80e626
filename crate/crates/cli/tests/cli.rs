use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memfract::cv_data::parse_cv_csv;
use memfract_cli::report::Report;
use memfract_cli::svg::render_all;
use serde_json::Value;
use tempfile::TempDir;

fn memfract(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memfract"))
        .args(args)
        .env_remove("MEMFRACT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = memfract(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut all = vec!["synth"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--output", path.to_str().unwrap()]);
    ok(&all);
    path
}

fn analyze(csv: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["analyze", csv.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema_valid(report: &Value) {
    let validator = jsonschema::validator_for(&schema()).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(report)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn synth_sweep_has_requested_rows() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "s.csv", &["sweep", "--vpp", "1", "--n", "401", "--delay", "0.01"]);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 402);
    let run = parse_cv_csv(text.as_bytes(), "s").unwrap();
    assert_eq!(run.len(), 401);
    assert!((run.t_max() - 4.0).abs() < 1e-12);
    assert!(run.current.iter().all(|&i| i == 0.0));
}

#[test]
fn synth_resistor_is_ohmic() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "r.csv", &["resistor", "--r", "1000"]);
    let run = parse_cv_csv(fs::File::open(path).unwrap(), "r").unwrap();
    for (v, i) in run.voltage.iter().zip(&run.current) {
        assert!((i - v / 1000.0).abs() <= 1e-15);
    }
}

#[test]
fn synth_memristor_loop_is_pinched() {
    let out = ok(&["synth", "memristor"]);
    let run = parse_cv_csv(out.as_bytes(), "m").unwrap();
    let i_max = run.current.iter().fold(0.0f64, |m, i| m.max(i.abs()));
    for (v, i) in run.voltage.iter().zip(&run.current) {
        if *v == 0.0 {
            assert!(i.abs() <= 1e-12 * i_max);
        }
    }
    // not a straight line through the origin
    let r: Vec<f64> = run
        .voltage
        .iter()
        .zip(&run.current)
        .filter(|(v, _)| v.abs() > 0.5)
        .map(|(v, i)| v / i)
        .collect();
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!(hi > 1.5 * lo, "resistance range {lo}..{hi}");
}

#[test]
fn synth_rejects_bad_parameters() {
    assert_eq!(memfract(&["synth", "resistor", "--r", "-5"]).status.code(), Some(2));
    assert_eq!(memfract(&["synth", "diode"]).status.code(), Some(2));
    assert_eq!(memfract(&["synth", "sweep", "--n", "3"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_two_naming_path() {
    for cmd in ["fit", "analyze", "spikes"] {
        let out = memfract(&[cmd, "/no/such/run.csv"]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/run.csv"));
    }
}

#[test]
fn malformed_csv_exits_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,v,i\n0,0,0\n1,abc,0\n").unwrap();
    assert_eq!(memfract(&["fit", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_thread_count_exits_two() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "r.csv", &["resistor"]);
    let out = Command::new(env!("CARGO_BIN_EXE_memfract"))
        .args(["fit", path.to_str().unwrap()])
        .env("MEMFRACT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_tent_reports_high_r_squared() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "t.csv", &["resistor", "--shape", "tent"]);
    let fit: Value = serde_json::from_str(&ok(&["fit", "--degree", "30", path.to_str().unwrap()])).unwrap();
    assert_eq!(fit["piecewise"], false);
    for key in ["voltage_stats", "current_stats"] {
        let r2 = fit[key][0]["r_squared"].as_f64().unwrap();
        assert!(r2 >= 0.999, "{key}: {r2}");
    }
}

#[test]
fn piecewise_fit_detects_vertex_and_writes_model() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "t.csv", &["resistor", "--shape", "tent"]);
    let out_dir = dir.path().join("fit");
    let stdout = ok(&[
        "fit",
        "--piecewise",
        "--degree",
        "10",
        "--output-dir",
        out_dir.to_str().unwrap(),
        path.to_str().unwrap(),
    ]);
    let fit: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(fit["vertex_time"].as_f64(), Some(2.0));
    assert_eq!(fit["voltage"]["kind"], "piecewise");
    assert_eq!(fit["voltage_stats"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_to_string(out_dir.join("model.json")).unwrap(), stdout);
}

#[test]
fn resistor_report_validates_and_classifies() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "r.csv", &["resistor", "--r", "1000"]);
    let report = analyze(&path, &dir.path().join("out"), &[]);
    assert_schema_valid(&report);
    let orders = &report["optimum"]["orders"];
    assert!((orders["alpha1"].as_f64().unwrap() - 1.0).abs() <= 0.05);
    assert!((orders["alpha2"].as_f64().unwrap() - 1.0).abs() <= 0.05);
    assert_eq!(report["classification"]["nearest_elements"][0]["label"], "resistor");
}

#[test]
fn piecewise_and_memristor_reports_validate() {
    let dir = TempDir::new().unwrap();
    let tent = synth(dir.path(), "t.csv", &["resistor", "--shape", "tent"]);
    let report = analyze(&tent, &dir.path().join("t"), &["--piecewise", "--degree", "10", "--grid-points", "501"]);
    assert_schema_valid(&report);
    assert_eq!(report["fit"]["vertex_time"].as_f64(), Some(2.0));
    let mem = synth(dir.path(), "m.csv", &["memristor"]);
    let report = analyze(&mem, &dir.path().join("m"), &["--grid-points", "501"]);
    assert_schema_valid(&report);
    assert!(report["score"]["value"]["value"].as_f64().unwrap() >= 0.5);
}

#[test]
fn proportional_signals_admit_the_whole_diagonal() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "r.csv", &["resistor", "--r", "250"]);
    let report = analyze(&path, &dir.path().join("out"), &["--alpha-step", "0.05", "--grid-points", "501"]);
    let runs: Vec<[f64; 3]> = serde_json::from_value(report["search"]["admissible_runs"].clone()).unwrap();
    for k in 0..=40 {
        let a = k as f64 / 20.0;
        assert!(
            runs.iter().any(|r| (r[0] - a).abs() < 1e-9 && r[1] <= a + 1e-9 && a <= r[2] + 1e-9),
            "({a}, {a}) not admissible"
        );
    }
}

#[test]
fn figures_rederive_from_report_json() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "m.csv", &["memristor"]);
    let out = dir.path().join("out");
    analyze(&path, &out, &["--grid-points", "501", "--alpha-step", "0.02"]);
    let report: Report = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let figures = render_all(&report);
    assert!(figures.len() >= 8);
    for (name, body) in figures {
        assert_eq!(fs::read_to_string(out.join(&name)).unwrap(), body, "{name} differs");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), "r.csv", &["resistor"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"degree": 12, "grid_points": 301, "alpha_step": 0.05}"#).unwrap();
    let report = analyze(
        &path,
        &dir.path().join("out"),
        &["--config", cfg.to_str().unwrap(), "--degree", "8"],
    );
    assert_eq!(report["config"]["degree"], 8);
    assert_eq!(report["config"]["grid_points"], 301);
    assert_eq!(report["config"]["alpha_step"], 0.05);

    fs::write(&cfg, r#"{"degre": 12}"#).unwrap();
    let out = memfract(&["analyze", path.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spikes_command_writes_tables() {
    let dir = TempDir::new().unwrap();
    let n = 401;
    let mut csv = String::from("t,v,i\n");
    for k in 0..n {
        let t = k as f64 * 0.01;
        let v = 0.5 * (std::f64::consts::PI * t / 4.0).sin();
        let bump = if [80, 160, 240, 320].contains(&k) { 5e-4 } else { 0.0 };
        csv.push_str(&format!("{t},{v},{}\n", v * 1e-3 + bump));
    }
    let path = dir.path().join("spiky.csv");
    fs::write(&path, csv).unwrap();
    let out = dir.path().join("sp");
    let stdout = ok(&["spikes", path.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["train"]["spike_indices"], serde_json::json!([80, 160, 240, 320]));
    let spikes = fs::read_to_string(out.join("spikes.csv")).unwrap();
    assert_eq!(spikes.lines().count(), 5);
    assert!(out.join("intervals.csv").exists());
    assert!(out.join("spike_intervals.svg").exists());
}
