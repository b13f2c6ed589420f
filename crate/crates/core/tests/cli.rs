use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cvquad() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvquad"));
    cmd.env_remove("CVQUAD_OUT_DIR").env("RUST_LOG", "off");
    cmd
}

fn run(args: &[&str]) -> Output {
    cvquad().args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/knn_integral.cfg")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn estimate_constant_returns_power() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "c.cfg", r#"{"function":{"kind":"constant","c":3},"estimator":{"method":"plain_mc"},"q":2,"n":100}"#);
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(row["estimate"]["value"].as_f64(), Some(9.0));
    assert_eq!(row["schema_version"].as_u64(), Some(1));
    assert_eq!(row["config_hash"].as_str().map(str::len), Some(64));
}

#[test]
fn estimate_malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_cfg(dir.path(), "m.cfg", "{\"function\": {\"kind\": \"constant\",\n");
    let o = run(&["estimate", "--config", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"));

    let unknown =
        write_cfg(dir.path(), "u.cfg", r#"{"function":{"kind":"constant","c":1},"estimator":{"method":"plain_mc"},"n":10,"bogus":1}"#);
    let o = run(&["estimate", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let o = run(&["estimate", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_rare_event_cv_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "r.cfg",
        r#"{"function":{"kind":"constant","c":3},
            "estimator":{"method":"cv_moment","regressor":{"kind":"grid","cells":"half_n"}},
            "q":3,"n":200,"theory":{"s":0.05,"p":4}}"#,
    );
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("warning") && err.contains("rare-event"), "{err}");
    assert_eq!(err.matches("rare-event").count(), 1);
}

#[test]
fn estimate_estimator_error_is_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "k.cfg",
        r#"{"function":{"kind":"sine_plus_two"},"estimator":{"method":"knn_quadrature","k":{"fixed":500}},"n":100}"#,
    );
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_bundled_config_writes_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["sweep", "--config", bundled().to_str().unwrap(), "--out", out.to_str().unwrap(), "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], cvquad::cli::CSV_HEADER);
    let ns: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(ns, ["256", "512", "1024", "2048", "4096"]);
    assert!(!csv.contains('\r'));

    let jsonl = std::fs::read_to_string(out.join("cells.jsonl")).unwrap();
    let records: Vec<Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records[0]["record"], "header");
    assert!(records[0]["timestamp"].is_u64());
    assert_eq!(records.len(), 1 + 5 * 30);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("rate_report.json")).unwrap()).unwrap();
    assert!(report["report"]["fit"]["slope"].is_f64());

    let svg = std::fs::read_to_string(out.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("class=\"fit\""));
    assert!(svg.contains("class=\"theory\""));
    assert_eq!(svg.matches("class=\"point\"").count(), 5);
}

#[test]
fn sweep_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&["sweep", "--config", bundled().to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("sweep.csv")).unwrap();
    assert_eq!(read(&a), read(&b));

    let c = dir.path().join("c");
    let o = run(&["sweep", "--config", bundled().to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn sweep_out_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = cvquad().args(["sweep", "--config", bundled().to_str().unwrap()]).env("CVQUAD_OUT_DIR", dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("sweep.csv").exists());
    assert!(!dir.path().join("sweep.svg").exists());
}

#[test]
fn sweep_rejects_short_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "s.cfg",
        r#"{"function":{"kind":"sine_plus_two"},"estimator":{"method":"plain_mc"},"n_grid":[64,128],"reps":30}"#,
    );
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn theory_smooth_regime() {
    let o = run(&["theory", "--s", "2", "--p", "4", "--q", "3", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("moment exponent  -2.500000"), "{out}");
    assert!(out.contains("recommended      CV"));
}

#[test]
fn theory_rare_event_regime() {
    let o = run(&["theory", "--s", "0.05", "--p", "4", "--q", "3", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("moment exponent  -0.400000"), "{out}");
    assert!(out.contains("recommended      TruncatedMC"));
}

#[test]
fn theory_usage_errors() {
    let o = run(&["theory", "--s", "2", "--p", "4", "--q", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));

    let o = run(&["theory", "--s", "2", "--p", "1", "--q", "3", "--d", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p > 2"));
}

#[test]
fn lab_default_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lab", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(!out.contains("FAIL"));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("lab_report.json")).unwrap()).unwrap();
    assert!(saved["report"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn lab_tampered_constant_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "lab.json", r#"{"seed":0,"tamper":"hoeffding_constant_n10"}"#);
    let o = run(&["lab", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().matches("FAIL").count(), 1);
}

#[test]
fn lab_trials_below_floor_is_usage_error() {
    let o = run(&["lab", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plot_renders_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--config", bundled().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let plots = dir.path().join("plots");
    let o = run(&["plot", "--report", dir.path().join("rate_report.json").to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(plots.join("rate_plot.svg")).unwrap();
    assert!(svg.contains("class=\"fit\"") && svg.contains("class=\"theory\""));

    let bogus = write_cfg(dir.path(), "bogus.json", "{\"report\": 3}");
    let o = run(&["plot", "--report", bogus.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn lab_unknown_tamper_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "lab.json", r#"{"tamper":"no_such_check","kl_trials":1000,"hoeffding_trials":1000}"#);
    assert_eq!(run(&["lab", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = cvquad::harness::ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
            cfg.validate_sweep().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
