//! Plain Monte Carlo against control variates for `∫ f^2` with a smooth `f`.

use cvquad::estimators;
use cvquad::regress::RegressorSpec;
use cvquad::sampling::{observe, sample_uniform, RngStream};
use cvquad::stats;
use cvquad::testfn::{reference_moment, TestFunction};

fn main() -> cvquad::Result<()> {
    let f = TestFunction::sine_plus_two(1);
    let q = 2;
    let truth = reference_moment(&f, q, 1e-12)?;
    println!("reference {truth:.12}");
    println!("{:>6}  {:>12}  {:>12}", "n", "plain rmse", "cv rmse");

    for n in [128usize, 512, 2048] {
        let (mut plain, mut cv) = (Vec::new(), Vec::new());
        for rep in 0..50 {
            let mut rng = RngStream::new(cvquad::DEFAULT_SEED, ((n as u64) << 32) | rep);
            let pts = sample_uniform(n, 1, &mut rng)?;
            let s = observe(&f, pts, f64::INFINITY, n, &mut rng)?;
            plain.push(estimators::plain_mc_moment(&s, q)?.value - truth);
            let spec = RegressorSpec::Knn { k: 1 };
            cv.push(estimators::cv_moment(&s, q, &spec, None)?.value - truth);
        }
        let rmse = |e: &[f64]| stats::mean(&e.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        println!("{n:>6}  {:>12.4e}  {:>12.4e}", rmse(&plain), rmse(&cv));
    }
    Ok(())
}
