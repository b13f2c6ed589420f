//! Runs the bundled k-NN quadrature sweep and reports the fitted rate.

use cvquad::harness::{self, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/knn_integral.cfg");
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
    let result = harness::run_sweep(&cfg)?;
    let report = harness::rate_report(&result)?;

    println!("{:>6}  {:>12}  {:>10}", "n", "rmse", "stderr");
    for s in &result.per_n {
        println!("{:>6}  {:>12.4e}  {:>10.2e}", s.n, s.stat, s.stderr);
    }
    println!("slope  {:.3}", report.slope().unwrap_or(f64::NAN));
    if let Some(t) = report.theory {
        println!("theory {t:.3}");
    }
    Ok(())
}
