//! Regime table for `p = 4, q = 3, d = 1` as the smoothness `s` varies.

use cvquad::rate_theory;

fn main() -> cvquad::Result<()> {
    let (p, q, d) = (4.0, 3, 1);
    let t = rate_theory::thresholds(p, q, d);
    println!("thresholds: {:.4} < {:.4} < {:.4}", t.method_transition, t.rate_transition, t.bounded);
    println!("{:>6}  {:>10}  {:>10}  {:>12}", "s", "regime", "exponent", "method");
    for s in [0.02, 0.05, 0.1, 0.2, 0.25, 0.5, 1.0, 2.0] {
        let r = rate_theory::regime(s, p, q, d)?;
        println!("{s:>6}  {:>10}  {:>10.4}  {:>12}", format!("{:?}", r.regime), r.exponent, format!("{:?}", r.recommended));
    }
    Ok(())
}
