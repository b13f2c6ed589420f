//! A heavy-tailed peak `|x|^{-β}`: plain Monte Carlo against truncation at `n^β`.

use cvquad::estimators;
use cvquad::sampling::{observe, sample_uniform, RngStream};
use cvquad::stats;
use cvquad::testfn::{reference_moment, TestFunction};

fn main() -> cvquad::Result<()> {
    let (beta, q) = (0.18, 3);
    let f = TestFunction::peak(beta, &[0.0], q, 5.0, 0.0)?;
    let truth = reference_moment(&f, q, 1e-12)?;
    println!("reference {truth:.10}  (truncated rate exponent {:.2})", cvquad::rate_theory::peak_truncated_exponent(beta, q));

    for n in [256usize, 1024, 4096, 16384] {
        let cap = estimators::peak_truncation(n, beta, 1.0);
        let (mut plain, mut trunc) = (Vec::new(), Vec::new());
        for rep in 0..100 {
            let mut rng = RngStream::new(7, ((n as u64) << 32) | rep);
            let s = observe(&f, sample_uniform(n, 1, &mut rng)?, f64::INFINITY, n, &mut rng)?;
            plain.push((estimators::plain_mc_moment(&s, q)?.value - truth).abs());
            trunc.push((estimators::truncated_mc_moment(&s, q, cap)?.value - truth).abs());
        }
        println!("n = {n:>5}  cap {cap:6.3}  median |err| plain {:.3e}  truncated {:.3e}", stats::median(&plain), stats::median(&trunc));
    }
    Ok(())
}
