use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_perceptron-lab"));
    c.env("SOURCE_DATE_EPOCH", "1700000000");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_stdout(out: &Output) -> Value {
    let text = stdout(out);
    let start = text.find('{').expect("JSON object in output");
    serde_json::from_str(&text[start..]).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(schema_file: &str, value: &Value) {
    let path = format!("{}/schemas/{schema_file}", env!("CARGO_MANIFEST_DIR"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("valid schema");
    let msgs: Vec<String> = match compiled.validate(value) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    };
    panic!("{schema_file}: {msgs:?}");
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gd_eval_text_and_bits() {
    let text = stdout(&run(&["gd-eval", "--alpha", ".847", "--q", ".5", "--bits"]));
    assert!(text.contains("-0.693573590280 nats"), "{text}");
    assert!(text.contains("-1.000615"), "{text}");
}

#[test]
fn gd_eval_json() {
    let v = json_stdout(&run(&["gd-eval", "--alpha", ".847", "--q", ".5", "--json"]));
    let nats = v["gd_nats"].as_f64().unwrap();
    assert!((nats - (-0.847 + 0.5 * (1.0 - std::f64::consts::LN_2))).abs() < 1e-9);
    assert!((v["gd_bits"].as_f64().unwrap() - nats / std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn domain_errors_exit_two() {
    for args in [
        &["gd-eval", "--alpha", ".847", "--q", "1.5"][..],
        &["gd-eval", "--alpha", "-1", "--q", ".5"],
        &["gd-min", "--alpha", ".5", "--nodes", "3"],
        &["capacity-bound", "--slack", "-1"],
        &["simulate-sphere", "--n-dim", "5", "--alpha", ".5", "--method", "bogus", "--samples", "10", "--trials", "1", "--out", "/tmp/unused.csv"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn io_errors_exit_three() {
    let out = run(&["sweep", "--out", "/nonexistent-dir/x.csv", "--q-start", ".5", "--q-stop", ".5", "--alpha-start", ".847", "--alpha-stop", ".847"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gd_min_json() {
    let v = json_stdout(&run(&["gd-min", "--alpha", ".847", "--json"]));
    let q = v["q_star"].as_f64().unwrap();
    assert!((0.5..=0.51).contains(&q));
    assert!(v["margin_vs_log2"].as_f64().unwrap() < 0.0);
}

#[test]
fn proposition_reports_discrepancy() {
    let v = json_stdout(&run(&["proposition", "--json"]));
    let half = v["half_overlap_margin"].as_f64().unwrap();
    assert!((half - (0.347 - 0.5 * std::f64::consts::LN_2)).abs() < 1e-8);
    assert_eq!(format!("{half:.4e}"), "4.2641e-4");
    assert!(v["minimized_margin"].as_f64().unwrap() >= v["half_overlap_margin"].as_f64().unwrap());
    assert_eq!(v["quoted_margin_exceeds_computed"], Value::Bool(true));
    assert!(v["note"].as_str().unwrap().contains("exceeds"));
}

#[test]
fn capacity_bound_certificates() {
    let zero = json_stdout(&run(&["capacity-bound", "--slack", "0"]));
    assert_schema("certificate.schema.json", &zero);
    let a0 = zero["alpha"].as_f64().unwrap();
    assert!((a0 - 0.84655).abs() < 5e-4 && a0 < 0.847);
    let sum = zero["log2_term"].as_f64().unwrap() + zero["free_energy_term"].as_f64().unwrap() + zero["slack_epsilon"].as_f64().unwrap();
    assert_eq!(sum, zero["rate"].as_f64().unwrap());
    assert_eq!(zero["conclusion"], "bound_holds");
    let loose = json_stdout(&run(&["capacity-bound", "--slack", ".001"]));
    assert!(loose["alpha"].as_f64().unwrap() > a0);
}

#[test]
fn sweep_single_point_matches_gd_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    stdout(&run(&["sweep", "--out", path_str(&out), "--q-start", ".5", "--q-stop", ".5", "--alpha-start", ".847", "--alpha-stop", ".847"]));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,q,gd_nats,gd_bits");
    assert_eq!(lines.len(), 2);
    let fields: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
    let eval = json_stdout(&run(&["gd-eval", "--alpha", ".847", "--q", ".5", "--json"]));
    assert_eq!(fields[2], eval["gd_nats"].as_f64().unwrap());
    let minima = std::fs::read_to_string(dir.path().join("one.csv.minima.csv")).unwrap();
    assert!(minima.starts_with("alpha,q_star,gd_min_nats,gd_min_bits\n"));
    let manifest = read_json(&dir.path().join("one.csv.manifest.json"));
    assert_schema("manifest.schema.json", &manifest);
    assert_eq!(manifest["started"], "2023-11-14T22:13:20Z");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_binary_outputs_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec!["simulate-binary", "--n-dim", "12", "--alpha", "1", "--trials", "500", "--seed", "11", "--out"]
            .into_iter()
            .map(String::from)
            .chain([path_str(p).to_owned()])
            .collect::<Vec<_>>()
    };
    stdout(&bin().args(args(&a)).output().unwrap());
    stdout(&bin().args(args(&b)).env("PERCEPTRON_LAB_THREADS", "1").output().unwrap());
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("seed,t,count\n"));
    assert_eq!(text.lines().count(), 1 + 500 * 13);

    let summary = read_json(&dir.path().join("a.csv.summary.json"));
    assert_schema("binary_summary.schema.json", &summary);
    for m in summary["prefix_moments"].as_array().unwrap() {
        assert!(m["z"].as_f64().unwrap().abs() <= 4.0, "{m}");
    }
    assert_schema("manifest.schema.json", &read_json(&dir.path().join("a.csv.manifest.json")));
}

#[test]
fn simulate_binary_dimension_guard() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["simulate-binary", "--n-dim", "31", "--alpha", "1", "--trials", "1", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn simulate_sphere_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    stdout(&run(&["simulate-sphere", "--n-dim", "10", "--alpha", ".5", "--samples", "200000", "--trials", "4", "--seed", "3", "--out", path_str(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("seed,f_hat,stderr,truncated\n"));
    assert_eq!(text.lines().count(), 5);
    let summary = read_json(&dir.path().join("s.csv.summary.json"));
    assert_schema("sphere_summary.schema.json", &summary);
    assert_eq!(summary["method"], "direct_gaussian");
    assert!(summary["variance"].as_f64().is_some());
    assert!(summary["caveat"].is_null());

    let again = dir.path().join("t.csv");
    let o = bin()
        .args(["simulate-sphere", "--n-dim", "10", "--alpha", ".5", "--samples", "200000", "--trials", "4", "--seed", "3", "--out", path_str(&again)])
        .env("PERCEPTRON_LAB_THREADS", "2")
        .output()
        .unwrap();
    stdout(&o);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn simulate_sphere_sequential_single_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    // alpha = .05 at N = 10 gives one constraint
    stdout(&run(&["simulate-sphere", "--n-dim", "10", "--alpha", ".05", "--method", "sequential", "--samples", "40000", "--trials", "1", "--seed", "5", "--out", path_str(&out)]));
    let summary = read_json(&dir.path().join("q.csv.summary.json"));
    assert_schema("sphere_summary.schema.json", &summary);
    assert_eq!(summary["n_constraints"], 1);
    assert!(summary["variance"].is_null());
    assert!(summary["caveat"].is_string());
    let text = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let f: f64 = row[1].parse().unwrap();
    let se: f64 = row[2].parse().unwrap();
    assert!((f - 0.5f64.ln() / 10.0).abs() < 4.0 * se, "{f} {se}");
}

#[test]
fn simulate_sphere_truncation_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tr.csv");
    // far above capacity with a tiny budget: no direction hits
    stdout(&run(&["simulate-sphere", "--n-dim", "20", "--alpha", "1.9", "--samples", "1000", "--trials", "2", "--seed", "1", "--out", path_str(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let row: Vec<&str> = line.split(',').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), -20.0);
        assert_eq!(row[3], "true");
    }
    assert_eq!(read_json(&dir.path().join("tr.csv.summary.json"))["truncated"], 2);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = bin().args(["gd-eval", "--alpha", ".5", "--q", ".5"]).env("PERCEPTRON_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for cmd in ["gd-eval", "gd-min", "sweep", "capacity-bound", "proposition", "simulate-binary", "simulate-sphere"] {
        let text = stdout(&run(&[cmd, "--help"]));
        assert!(text.contains("Usage"), "{cmd}");
    }
}
