//! Runs the lower-bound construction checks with a reduced trial budget.

use cvquad::fuzzy_lab::{self, LabConfig};

fn main() -> cvquad::Result<()> {
    let cfg = LabConfig { kl_trials: 100_000, hoeffding_trials: 20_000, ..Default::default() };
    let report = fuzzy_lab::run_lab(&cfg)?;
    for c in &report.checks {
        println!("{:<26} {:>14.6e} {:>14.6e}  {}", c.name, c.value, c.reference, if c.pass { "ok" } else { "FAIL" });
    }
    println!("all pass: {}", report.all_pass());

    // The closed-form KL bound for one sample at eps = 0.5.
    let b = fuzzy_lab::kl_bound_case1(1, 0.5)?;
    println!("KL {:.6e}, Pinsker TV bound {:.6e}", b.kl, b.tv_bound);
    Ok(())
}
