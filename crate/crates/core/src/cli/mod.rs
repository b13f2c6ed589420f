//! The `cvquad` command line.

mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::fuzzy_lab::{self, LabConfig};
use crate::harness::{self, ExperimentConfig};
use crate::rate_theory;
use crate::{estimators, plot};

pub use output::{config_hash, CSV_HEADER, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cvquad", version, about = "Control-variate quadrature and moment estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single estimate and print it as one JSON line.
    Estimate(RunArgs),
    /// Run a sample-size sweep and write CSV, JSONL and a rate report.
    Sweep(RunArgs),
    /// Print the regime table for a parameter set.
    Theory(TheoryArgs),
    /// Run the lower-bound construction checks.
    Lab(LabArgs),
    /// Render an SVG from a saved rate report.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write an SVG log-log plot.
    #[arg(long)]
    pub plot: bool,
    #[arg(long, env = "CVQUAD_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: u32,
    #[arg(long)]
    pub d: usize,
    /// Noise exponent; a number or `inf`.
    #[arg(long, default_value = "inf")]
    pub gamma: f64,
    /// Sample size for the schedules.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct LabArgs {
    /// JSON lab config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation trials for every randomized check.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, env = "CVQUAD_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A `rate_report.json` written by `sweep`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, env = "CVQUAD_OUT_DIR")]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Estimate(a) => with_threads(a.threads, || cmd_estimate(&a)),
        Command::Sweep(a) => with_threads(a.threads, || cmd_sweep(&a)),
        Command::Theory(a) => cmd_theory(&a),
        Command::Lab(a) => with_threads(a.threads, || cmd_lab(&a)),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn with_threads(threads: Option<usize>, body: impl FnOnce() -> i32 + Send) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_RUNTIME;
        }
    };
    pool.install(body)
}

fn exit_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::AssumptionViolated(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn out_dir(flag: &Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.clone().or_else(|| cfg.and_then(|c| c.output.as_ref()).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_estimate(a: &RunArgs) -> i32 {
    let cfg = match load_config(&a.config, a.seed) {
        Ok(c) => c,
        Err(code) => return code,
    };
    for w in harness::regime_warnings(&cfg) {
        eprintln!("warning: {w}");
    }
    let est = match harness::run_estimate(&cfg) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let hash = config_hash(&cfg);
    let row = json!({
        "schema_version": SCHEMA_VERSION,
        "timestamp": output::timestamp(),
        "config_hash": hash,
        "git_revision": output::git_revision(),
        "base_seed": cfg.base_seed,
        "gamma": output::num(cfg.gamma),
        "estimate": est,
    });
    println!("{row}");
    EXIT_OK
}

fn cmd_sweep(a: &RunArgs) -> i32 {
    let cfg = match load_config(&a.config, a.seed) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Err(e) = cfg.validate_sweep() {
        eprintln!("error: {}: {e}", a.config.display());
        return EXIT_USAGE;
    }
    let result = match harness::run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let report = match harness::rate_report(&result) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let hash = config_hash(&cfg);
    let dir = out_dir(&a.out, Some(&cfg));
    let mut files = vec![
        ("sweep.csv", output::sweep_csv(&result, &hash)),
        ("cells.jsonl", output::sweep_jsonl(&result, &hash)),
        ("rate_report.json", output::report_json(&report, &hash)),
    ];
    if a.plot {
        files.push(("sweep.svg", plot::render_svg(&report, &plot_title(&cfg))));
    }
    for (name, text) in &files {
        let path = dir.join(name);
        if let Err(e) = output::write(&path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", output::sweep_csv(&result, &hash));
    match (report.slope(), report.theory) {
        (Some(s), Some(t)) => eprintln!(
            "slope {s:.4} (theory {t:.4}, verdict {})",
            if report.verdict == Some(true) { "within tolerance" } else { "outside tolerance" }
        ),
        (Some(s), None) => eprintln!("slope {s:.4}"),
        _ => eprintln!("no slope fitted"),
    }
    if result.failures() > 0 {
        eprintln!("warning: {} cells failed; see cells.jsonl", result.failures());
    }
    EXIT_OK
}

fn plot_title(cfg: &ExperimentConfig) -> String {
    let method = serde_json::to_value(&cfg.estimator)
        .ok()
        .and_then(|v| v.get("method").and_then(|m| m.as_str()).map(str::to_string))
        .unwrap_or_default();
    format!("{method}, q = {}", cfg.q)
}

fn cmd_theory(a: &TheoryArgs) -> i32 {
    let report = match rate_theory::regime(a.s, a.p, a.q, a.d) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let (heavy, smooth) = rate_theory::moment_branches(a.s, a.p, a.q, a.d);
    let t = report.thresholds;
    println!("parameters       s = {}, p = {}, q = {}, d = {}, gamma = {}", a.s, a.p, a.q, a.d, a.gamma);
    println!("regime           {:?}{}", report.regime, if report.on_boundary { " (on boundary)" } else { "" });
    println!("threshold d/p                  {:.6}", t.bounded);
    println!("threshold d(2q-p)/(p(2q-2))    {:.6}", t.rate_transition);
    println!("threshold d(2q-p)/(2pq)        {:.6}", t.method_transition);
    println!("moment exponent  {:.6} (branches {heavy:.6}, {smooth:.6})", report.exponent);
    match rate_theory::integral_exponent(a.s, a.d, a.gamma) {
        Ok(e) => println!("integral exponent {e:.6}"),
        Err(e) => println!("integral exponent n/a ({e})"),
    }
    println!("recommended      {:?}", report.recommended);
    match estimators::default_truncation(a.n, a.s, a.p, a.d, 1.0) {
        Ok(m) => println!("truncation M     n^{:.6} = {m:.6} at n = {}", 1.0 / a.p - a.s / a.d as f64, a.n),
        Err(e) => println!("truncation M     n/a ({e})"),
    }
    match rate_theory::optimal_k(a.n, a.s, a.d, a.gamma) {
        Ok(k) => println!("k-NN neighbours  {k} at n = {}", a.n),
        Err(e) => println!("k-NN neighbours  n/a ({e})"),
    }
    EXIT_OK
}

fn cmd_lab(a: &LabArgs) -> i32 {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return EXIT_USAGE;
                }
            };
            match serde_json::from_str::<LabConfig>(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_USAGE;
                }
            }
        }
        None => LabConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.kl_trials = t;
        cfg.hoeffding_trials = t;
    }
    if cfg.kl_trials < 1000 || cfg.hoeffding_trials < 1000 {
        eprintln!("error: trial counts must be at least 1000");
        return EXIT_USAGE;
    }
    let report = match fuzzy_lab::run_lab(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    println!("{:<28} {:>24}    {:>24} {:>12}  result", "check", "value", "reference", "tolerance");
    for c in &report.checks {
        let rel = match c.relation {
            fuzzy_lab::Relation::Within => "~=",
            fuzzy_lab::Relation::AtMost => "<=",
        };
        println!(
            "{:<28} {:>24} {rel} {:>24} {:>12.3e}  {}",
            c.name,
            output::num(c.value),
            output::num(c.reference),
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(dir) = &a.out {
        let text = serde_json::to_string_pretty(&json!({ "schema_version": SCHEMA_VERSION, "config": cfg, "report": report }))
            .expect("lab report serializes");
        let path = dir.join("lab_report.json");
        if let Err(e) = output::write(&path, &(text + "\n")) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    if report.all_pass() {
        EXIT_OK
    } else {
        eprintln!("{} of {} checks failed", report.checks.iter().filter(|c| !c.pass).count(), report.checks.len());
        EXIT_CHECK_FAILED
    }
}

fn cmd_plot(a: &PlotArgs) -> i32 {
    let text = match std::fs::read_to_string(&a.report) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", a.report.display());
            return EXIT_USAGE;
        }
    };
    let parsed: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}: {e}", a.report.display());
            return EXIT_USAGE;
        }
    };
    let report: harness::RateReport = match serde_json::from_value(parsed.get("report").cloned().unwrap_or(parsed)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: not a rate report: {e}", a.report.display());
            return EXIT_USAGE;
        }
    };
    let svg = plot::render_svg(&report, "error against n");
    let path = out_dir(&a.out, None).join("rate_plot.svg");
    if let Err(e) = output::write(&path, &svg) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_RUNTIME;
    }
    println!("{}", path.display());
    EXIT_OK
}
