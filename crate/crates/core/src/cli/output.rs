//! Run artifacts: CSV summaries, JSONL cell logs, provenance headers.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::harness::{ExperimentConfig, RateReport, SweepResult};

pub const SCHEMA_VERSION: u32 = 1;

/// SHA-256 of the canonical config JSON, which includes the base seed.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

pub fn git_revision() -> Option<String> {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "schema_version,config_hash,base_seed,gamma,n,stat,n_reps,stderr,failures,error";

/// One row per grid size. No timestamps, so reruns are byte-identical.
pub fn sweep_csv(result: &SweepResult, hash: &str) -> String {
    let cfg = &result.config;
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &result.per_n {
        let failed: Vec<&str> = result.cells.iter().filter(|c| c.n == s.n).filter_map(|c| c.failure.as_deref()).collect();
        let _ = writeln!(
            out,
            "{SCHEMA_VERSION},{hash},{},{},{},{},{},{},{},{}",
            cfg.base_seed,
            num(cfg.gamma),
            s.n,
            num(s.stat),
            s.n_reps,
            num(s.stderr),
            failed.len(),
            csv_field(failed.first().copied().unwrap_or(""))
        );
    }
    out
}

pub fn header(cfg: &ExperimentConfig, hash: &str) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "record": "header",
        "timestamp": timestamp(),
        "config_hash": hash,
        "git_revision": git_revision(),
        "config": cfg,
    })
}

fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("record serializes")
}

/// Header line followed by one line per `(n, rep)` cell.
pub fn sweep_jsonl(result: &SweepResult, hash: &str) -> String {
    let cfg = &result.config;
    let mut out = to_line(&header(cfg, hash));
    out.push('\n');
    for c in &result.cells {
        let row = json!({
            "schema_version": SCHEMA_VERSION,
            "record": "cell",
            "config_hash": hash,
            "base_seed": cfg.base_seed,
            "gamma": num(cfg.gamma),
            "reference": result.reference,
            "n": c.n,
            "rep": c.rep,
            "stream": c.stream,
            "value": c.value,
            "error": c.error,
            "params": c.params,
            "failure": c.failure,
        });
        out.push_str(&to_line(&row));
        out.push('\n');
    }
    out
}

pub fn report_json(report: &RateReport, hash: &str) -> String {
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": hash,
        "report": report,
    });
    serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
}

pub fn write(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
