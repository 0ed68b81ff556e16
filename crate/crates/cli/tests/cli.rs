use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hyperlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out", out]);
    hyperlab(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn hashes(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn write_spec(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_lorenz_writes_orbit_csv() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["simulate", "--model", "lorenz", "--t", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("orbit.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,c0,c1,c2"));
    assert_eq!(csv.lines().count(), 10_002);
    let m = manifest(d.path());
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["config"]["model"], "lorenz");
    for (file, hash) in hashes(d.path()) {
        assert!(d.path().join(&file).exists());
        assert_eq!(hash.len(), 64);
    }
}

#[test]
fn simulate_is_deterministic_and_seed_dependent() {
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["simulate", "--model", "lorenz", "--t", "20"];
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    assert_eq!(code(&run_in(b.path(), &args)), 0);
    assert_eq!(hashes(a.path()), hashes(b.path()));
    let mut other = args.to_vec();
    other.extend(["--seed", "7"]);
    assert_eq!(code(&run_in(c.path(), &other)), 0);
    assert_ne!(hashes(a.path()), hashes(c.path()));
}

#[test]
fn unknown_model_lists_the_models() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["simulate", "--model", "lorentz"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    for name in ["lorenz", "cat_map", "doubling", "wild"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn config_errors_name_the_key() {
    let d = TempDir::new().unwrap();
    let cfg = write_spec(&d, "c.json", r#"{"model": "lorenz", "tt": 5}"#);
    let o = run_in(&d.path().join("out"), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tt"), "{}", stderr(&o));
    let cfg = write_spec(&d, "c2.json", r#"{"model": "lorenz", "t": "long"}"#);
    let o = run_in(&d.path().join("out"), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`t`"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_and_config_seed_is_used() {
    let d = TempDir::new().unwrap();
    let cfg = write_spec(&d, "c.json", r#"{"model": "doubling", "steps": 50, "seed": 5}"#);
    let out = d.path().join("out");
    let o = run_in(&out, &["simulate", "--config", cfg.to_str().unwrap(), "--steps", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["steps"], 10);
    assert_eq!(fs::read_to_string(out.join("orbit.csv")).unwrap().lines().count(), 12);
}

#[test]
fn malformed_inputs_never_panic() {
    let d = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--model", "lorenz", "--initial", "1,2"],
        &["simulate", "--model", "lorenz", "--steps", "10"],
        &["simulate", "--model", "doubling", "--t", "10"],
        &["simulate", "--model", "lorenz", "--params", "{not json"],
        &["simulate", "--model", "lorenz", "--params", r#"{"sigma": -1}"#],
        &["analyze", "periodic", "--model", "doubling", "--period", "0"],
        &["verify", "--model", "lorenz"],
        &["kneading", "--slope", "-1"],
        &["kneading", "--map", r#"{"kind": "tent"}"#],
        &["--threads", "0", "kneading"],
        &["replay", "/nonexistent/manifest.json"],
    ];
    for args in cases {
        let o = run_in(d.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).contains("panicked"), "{args:?}");
    }
}

#[test]
fn verify_exit_code_is_the_verdict() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["verify", "--model", "cat_map"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = run_in(d.path(), &["verify", "--matrix", "[[1,0],[0,1]]"]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    let failing: Vec<&Value> = report["report"]["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["holds"] == false)
        .collect();
    assert_eq!(failing.len(), 1);
    assert!(!failing[0]["witness_point"].as_array().unwrap().is_empty());
    assert!(stdout(&o).contains("witness"));
}

#[test]
fn verify_lorenz_benchmark_reports_q() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["verify", "--model", "lorenz_pl"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert!(report["extra"]["q_squared"].as_f64().unwrap() > 1.0);
}

#[test]
fn verify_wild_lists_every_condition() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["verify", "--model", "wild"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    let conds = report["report"]["conditions"].as_array().unwrap();
    let holds = |id: &str| conds.iter().find(|c| c["condition"] == id).unwrap()["holds"] == true;
    for id in ["ct0", "ct2", "ct3", "ct4", "ct5"] {
        assert!(holds(id), "{id}");
    }
    assert_eq!(code(&o), if holds("ct1") { 0 } else { 1 });
}

#[test]
fn analyze_lyapunov_lorenz_sum_matches_divergence() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["analyze", "lyapunov", "--model", "lorenz"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(d.path().join("lyapunov.json")).unwrap()).unwrap();
    let ex: Vec<f64> = r["exponents"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(ex.len(), 3);
    let sum: f64 = ex.iter().sum();
    assert!((sum + 41.0 / 3.0).abs() < 0.02 * 41.0 / 3.0, "{sum}");
    assert!(d.path().join("lyapunov.svg").exists());
}

#[test]
fn analyze_periodic_doubling_period_four() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["analyze", "periodic", "--model", "doubling", "--period", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs: Vec<Value> = serde_json::from_str(&fs::read_to_string(d.path().join("periodic.json")).unwrap()).unwrap();
    assert_eq!(recs.len(), 15);
    assert!(recs.iter().all(|r| r["stability"] == "repelling"));
}

#[test]
fn analyze_dimension_from_csv_matches_model_run() {
    let d = TempDir::new().unwrap();
    let sim = d.path().join("sim");
    let o = run_in(&sim, &["simulate", "--model", "cat_map", "--steps", "20000", "--initial", "0.1,0.2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = sim.join("orbit.csv");
    let from_file = d.path().join("file");
    let o = run_in(&from_file, &["analyze", "dimension", "--input", csv.to_str().unwrap(), "--scale-hi", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(from_file.join("dimension.json")).unwrap()).unwrap();
    let dim = r["dimension"].as_f64().unwrap();
    assert!((dim - 2.0).abs() < 0.1, "{dim}");
    let o = run_in(d.path(), &["analyze", "dimension", "--input", "x.csv", "--model", "lorenz"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_recurrence_finds_returns() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["analyze", "recurrence", "--model", "lorenz", "--t", "200", "--radius", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(d.path().join("recurrence.json")).unwrap()).unwrap();
    assert!(r["result"]["entries"].as_array().unwrap().len() >= 2);
}

#[test]
fn analyze_attractor_lorenz_writes_cells_and_projection() {
    let d = TempDir::new().unwrap();
    let o = run_in(
        d.path(),
        &["analyze", "attractor", "--model", "lorenz", "--h", "1", "--eps", "0.5", "--tau", "0.5", "--edges"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cells = fs::read_to_string(d.path().join("attractor.csv")).unwrap();
    assert!(cells.lines().count() > 1000);
    let svg = fs::read_to_string(d.path().join("attractor.svg")).unwrap();
    assert!(svg.contains("<rect"));
    assert!(d.path().join("edges.csv").exists());
}

#[test]
fn scan_spec_errors_exit_two() {
    let d = TempDir::new().unwrap();
    let bad = write_spec(&d, "bad.json", r#"{"family": "blue_sky", "axes": [{"name": "mu", "lo": 1e-6, "hi": 1e-2, "num": 5}]}"#);
    let o = run_in(&d.path().join("o"), &["scan", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("num"), "{}", stderr(&o));
    let bad = write_spec(&d, "bad2.json", r#"{"family": "blue_sky", "axes": [{"name": "mu", "values": "x"}]}"#);
    let o = run_in(&d.path().join("o"), &["scan", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("axes[0].values"), "{}", stderr(&o));
    let empty = write_spec(&d, "empty.json", r#"{"family": "blue_sky", "axes": [{"name": "mu", "values": []}]}"#);
    let o = run_in(&d.path().join("o"), &["scan", "--spec", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn blue_sky_scan_period_is_monotone() {
    let d = TempDir::new().unwrap();
    let spec = write_spec(
        &d,
        "s.json",
        r#"{"family": "blue_sky", "axes": [{"name": "mu", "lo": 1e-8, "hi": 1e-2, "n": 25, "scale": "log"}]}"#,
    );
    let out = d.path().join("o");
    let o = run_in(&out, &["scan", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = head.iter().position(|h| *h == "period").unwrap();
    let periods: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(periods.len(), 25);
    assert!(periods.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(manifest(&out)["config"]["seed"], 1);
}

#[test]
fn lorenz_scan_heat_map_is_valid_svg() {
    let d = TempDir::new().unwrap();
    let spec = write_spec(
        &d,
        "s.json",
        r#"{"family": "lorenz_family", "axes": [{"name": "mu1", "lo": -0.1, "hi": 0.1, "n": 4}, {"name": "mu2", "lo": -0.1, "hi": 0.1, "n": 3}]}"#,
    );
    let o = run_in(d.path(), &["scan", "--config", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(d.path().join("scan.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 1 + 12 + 2);
    assert_well_formed(&svg);
}

#[test]
fn kneading_outputs() {
    let d = TempDir::new().unwrap();
    let o = run_in(d.path(), &["kneading"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("kneading.txt")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("+ : {}", "L".repeat(64)));
    assert_eq!(lines.next().unwrap(), format!("− : {}", "R".repeat(64)));

    let o = run_in(d.path(), &["kneading", "--slope", "1.8", "--compare", r#"{"kind": "symmetric_slope", "slope": 1.8}"#]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("compare: equal"), "{}", stdout(&o));

    let o = run_in(d.path(), &["kneading", "--slope", "2", "--compare-slope", "1.9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j: Value = serde_json::from_str(&fs::read_to_string(d.path().join("kneading.json")).unwrap()).unwrap();
    assert_eq!(j["compare"]["equal"], false);
    assert!(stdout(&o).contains("first difference at index"), "{}", stdout(&o));
}

#[test]
fn replay_reproduces_every_command() {
    let d = TempDir::new().unwrap();
    let spec = write_spec(
        &d,
        "s.json",
        r#"{"family": "circle_family", "base": {"m": 2, "g": {"kind": "sine", "amp": 0.1}}, "axes": [{"name": "omega", "lo": 0, "hi": 1, "n": 8}]}"#,
    );
    let runs: Vec<Vec<&str>> = vec![
        vec!["simulate", "--model", "doubling", "--steps", "100"],
        vec!["verify", "--model", "expanding_circle", "--params", r#"{"m": 3}"#],
        vec!["analyze", "lyapunov", "--model", "cat_map", "--steps", "1000"],
        vec!["analyze", "periodic", "--model", "doubling", "--period", "3"],
        vec!["scan", "--spec", spec.to_str().unwrap()],
        vec!["kneading", "--slope", "1.7"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out = d.path().join(format!("run{i}"));
        let o = run_in(&out, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let again = d.path().join(format!("again{i}"));
        let m = out.join("manifest.json");
        let o = hyperlab(&["replay", m.to_str().unwrap(), "--out", again.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{args:?}: {}", stdout(&o));
        assert!(stdout(&o).contains("replay identical"));
        assert_eq!(hashes(&out), hashes(&again));
    }
}

#[test]
fn replay_detects_tampering() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run_in(d.path(), &["kneading"])), 0);
    let p = d.path().join("manifest.json");
    let mut m = manifest(d.path());
    m["outputs"][0]["sha256"] = Value::String("0".repeat(64));
    fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
    let o = hyperlab(&["replay", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("DIFFERS"));
}

#[test]
fn svg_outputs_are_small_and_well_formed() {
    let d = TempDir::new().unwrap();
    let runs: &[&[&str]] = &[
        &["simulate", "--model", "lorenz"],
        &[
            "simulate",
            "--model",
            "geometric_lorenz",
            "--params",
            r#"{"x1s": 0.5, "y1s": -0.8, "alpha": 0.8, "phi1": 0.2, "psi1": 1.7}"#,
        ],
        &["simulate", "--model", "lorenz_pl"],
        &["analyze", "lyapunov", "--model", "lorenz"],
        &["analyze", "dimension", "--model", "lorenz"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out = d.path().join(format!("r{i}"));
        let o = run_in(&out, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        for entry in fs::read_dir(&out).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "svg") {
                let text = fs::read_to_string(&p).unwrap();
                assert!(text.len() < 5 << 20, "{}", p.display());
                assert_well_formed(&text);
            }
        }
    }
}

/// Tags balance and every element is closed.
fn assert_well_formed(svg: &str) {
    assert!(svg.starts_with("<?xml"));
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
    let mut stack: Vec<String> = Vec::new();
    let mut rest = svg;
    while let Some(i) = rest.find('<') {
        let j = rest[i..].find('>').expect("tag closes") + i;
        let tag = &rest[i + 1..j];
        rest = &rest[j + 1..];
        if tag.starts_with('?') || tag.ends_with('/') {
            continue;
        }
        let name = tag.split_whitespace().next().unwrap();
        if let Some(closing) = name.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(closing));
        } else {
            stack.push(name.to_string());
        }
    }
    assert!(stack.is_empty(), "{stack:?}");
}
