use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_TUNE: &str = r#"
seed = 3

[optimizer.pso]
pop_size = 6
max_iter = 3

[optimizer.ica]
n_colonies = 6
n_imperialists = 2
max_iter = 3

[optimizer.aco]
ants = 6
max_iter = 3
"#;

fn crossreg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossreg"))
        .args(args)
        .current_dir(dir)
        .env_remove("CROSSREG_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trace_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[loop]\nsample_stride = 7\nsim_duration = 0.013\n");
    let out = crossreg(dir.path(), &["simulate", "--config", &cfg, "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,v1,v2,v3,iL1,iL2,iL3,duty,E"));
    let periods = (0.013f64 / 20e-6).round() as usize;
    assert_eq!(csv.lines().count() - 1, periods / 7 + 1);
    let svg = fs::read_to_string(dir.path().join("o/outputs.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(svg.matches(r#"class="axes""#).count(), 1);
    assert_eq!(svg.matches(r#"class="event""#).count(), 1);
}

#[test]
fn formats_flag_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = crossreg(dir.path(), &["simulate", "--out", "o", "--format", "svg"]);
    assert!(out.status.success());
    let names: Vec<String> = fs::read_dir(dir.path().join("o")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, ["outputs.svg"]);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_crossreg"))
        .args(["simulate", "--format", "json"])
        .current_dir(dir.path())
        .env("CROSSREG_OUT", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/simulate.json").exists());
}

#[test]
fn tune_is_byte_identical_and_on_the_simplex() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_TUNE);
    let before = fs::read(&cfg).unwrap();
    let files = ["weights.json", "history.csv", "convergence.svg"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = crossreg(dir.path(), &["tune", "--config", &cfg, "--algo", "pso", "--scenario", "load5_half", "--out", "a"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(files.map(|f| fs::read(dir.path().join("a").join(f)).unwrap()));
    }
    assert!(runs[0] == runs[1], "tune output differs between runs");
    assert_eq!(fs::read(&cfg).unwrap(), before);

    let w = read_json(&dir.path().join("a/weights.json"));
    let k: Vec<f64> = w["weights"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(w["algo"], "pso");
    assert_eq!(w["config"]["seed"], 3);

    let hist = fs::read_to_string(dir.path().join("a/history.csv")).unwrap();
    let best: Vec<f64> = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(best.len(), 3);
    assert!(best.windows(2).all(|p| p[1] <= p[0]));
}

#[test]
fn scenario_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_TUNE}\n[scenario]\nmethods = [\"ica\", \"constant\"]\n"));
    let out = crossreg(dir.path(), &["scenario", "--config", &cfg, "--scenario", "load5_half", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reg = fs::read_to_string(dir.path().join("o/regulation.csv")).unwrap();
    assert_eq!(reg.lines().next(), Some("method,scenario,snapshot_ms,rail,regulation_pct"));
    assert_eq!(reg.lines().count() - 1, 12);
    let conv = fs::read_to_string(dir.path().join("o/convergence.csv")).unwrap();
    assert_eq!(conv.lines().next(), Some("method,scenario,convergence_iter,total_regulation_pct"));
    assert_eq!(conv.lines().count() - 1, 2);

    let report = read_json(&dir.path().join("o/report.json"));
    assert_eq!(report["regulation"].as_array().unwrap().len(), 12);
    assert_eq!(report["config"]["scenario"]["methods"], serde_json::json!(["ica", "constant"]));
    assert_eq!(report["config"]["plant"]["v_in_nominal"], 28.0);
    assert_eq!(report["config"]["optimizer"]["ica"]["n_colonies"], 6);
    let row = &report["regulation"][0];
    for key in ["method", "scenario", "snapshot_ms", "rail", "regulation_pct"] {
        assert!(row.get(key).is_some(), "{key}");
    }
    assert_eq!(report["time_response"].as_array().unwrap().len(), 6);
}

#[test]
fn bench_finds_sphere_origin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[bench]\nfunctions = [\"sphere\"]\nseeds = 2\n");
    let out = crossreg(dir.path(), &["bench", "--config", &cfg, "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bench = read_json(&dir.path().join("o/bench.json"));
    let rows = bench["results"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!(r["distance_to_optimum"].as_f64().unwrap() < 0.05, "{r}");
    }
    let csv = fs::read_to_string(dir.path().join("o/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();

    let bad = write_config(dir.path(), "seed = 1\nseed = 2\n");
    let out = crossreg(dir.path(), &["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = crossreg(dir.path(), &["simulate", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(3));

    let unstable = write_config(dir.path(), "[loop]\ndt = 20e-6\n\n[plant]\nC_1 = 1e-8\nr_c_1 = 0.0\n");
    let out = crossreg(dir.path(), &["simulate", "--config", &unstable, "--out", "o"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t = "));

    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = crossreg(dir.path(), &["simulate", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(5));

    let out = crossreg(dir.path(), &["simulate", "--format", "pdf"]);
    assert_eq!(out.status.code(), Some(2));
}
