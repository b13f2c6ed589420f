//! Sweeps truncated Monte Carlo on a peak and writes a log-log SVG.
//!
//! Usage: `cargo run --release --example sweep_plot -- [out.svg]`

use cvquad::harness::{self, ExperimentConfig};
use cvquad::plot;

const CONFIG: &str = r#"{
    "function": { "kind": "peak", "beta": 0.18, "x0": [0.0], "q": 3, "p": 5.0, "s": 0.0 },
    "estimator": { "method": "truncated_mc", "truncation": { "peak": { "beta": 0.18 } } },
    "q": 3,
    "n_grid": [256, 1024, 4096, 16384],
    "reps": 60,
    "statistic": "median_abs"
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep_plot.svg".into());
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let report = harness::rate_report(&harness::run_sweep(&cfg)?)?;
    std::fs::write(&out, plot::render_svg(&report, "truncated Monte Carlo, peak"))?;
    println!("slope {:.3}, theory {:?}; wrote {out}", report.slope().unwrap_or(f64::NAN), report.theory);
    Ok(())
}
