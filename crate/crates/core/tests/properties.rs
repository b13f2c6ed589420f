use cvquad::constants;
use cvquad::estimators;
use cvquad::fuzzy_lab;
use cvquad::quadrature::{integrate, DEFAULT_BUDGET};
use cvquad::rate_theory;
use cvquad::regress::{self, knn::KnnRegressor, EmptyCellPolicy, Predictor};
use cvquad::sampling::{observe, sample_uniform, split_halves, PointSet, RngStream, SampleSet};
use cvquad::stats;
use cvquad::testfn::{self, AmplitudeExponent, TestFunction};
use proptest::prelude::*;

fn noiseless(f: &TestFunction, n: usize, seed: u64) -> SampleSet {
    let mut rng = RngStream::new(seed, 0);
    let pts = sample_uniform(n, f.dim(), &mut rng).unwrap();
    observe(f, pts, f64::INFINITY, n, &mut rng).unwrap()
}

fn random_set(n: usize, d: usize, seed: u64) -> SampleSet {
    let mut rng = RngStream::new(seed, 1);
    let pts = sample_uniform(n, d, &mut rng).unwrap();
    let ys = (0..n).map(|_| rng.standard_normal() * 3.0).collect();
    SampleSet::from_parts(pts, ys).unwrap()
}

#[test]
fn pinned_bump_norms_recompute() {
    for d in 1..=2 {
        for q in 1..=6 {
            let pinned = constants::bump_norm(q, d).unwrap().powi(q as i32);
            let fresh = testfn::bump_power_integral_numeric(q, d, 1e-15).unwrap();
            assert!(((pinned - fresh) / pinned).abs() < 1e-10, "q={q} d={d}: {pinned} vs {fresh}");
        }
    }
}

#[test]
fn case2_bump_scaling_includes_integrability_shift() {
    // amplitude m^{-s}: the per-bump norm scales with slope |t| - s - d/p
    for t in 0..=2 {
        let r = fuzzy_lab::scaling_check(1.0, 4.0, 1, t, &[2, 4, 8, 16, 32], AmplitudeExponent::LowerBoundCaseII).unwrap();
        assert!((r.slope - (t as f64 - 1.0 - 0.25)).abs() <= 0.05, "t={t}: {}", r.slope);
    }
}

#[test]
fn case1_bump_scaling() {
    for t in 0..=2 {
        let r = fuzzy_lab::sobolev_scaling_check(1.0, 4.0, t, &[2, 4, 8, 16, 32]).unwrap();
        assert!((r.slope - (t as f64 - 1.0)).abs() <= 0.05, "t={t}: {}", r.slope);
    }
}

#[test]
fn knn_distance_law_constant_is_stable() {
    for d in [1usize, 2] {
        let k = 5;
        let mut consts = Vec::new();
        for n in [256usize, 1024, 4096] {
            let mut acc = Vec::new();
            for rep in 0..40 {
                let s = random_set(n, d, 1000 + rep);
                let r = KnnRegressor::fit(&s, k).unwrap();
                let mut rng = RngStream::new(77, rep);
                for _ in 0..50 {
                    let z: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
                    let nb = r.neighbors(&z);
                    let far =
                        nb.iter().map(|&i| r.points().get(i).iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).fold(0.0, f64::max);
                    acc.push(far);
                }
            }
            consts.push(stats::mean(&acc) / (k as f64 / n as f64).powf(2.0 / d as f64));
        }
        let centre = stats::mean(&consts);
        for c in &consts {
            assert!((c / centre - 1.0).abs() <= 0.25, "d={d}: {consts:?}");
        }
    }
}

#[test]
fn peak_power_diverges_at_analytic_rate() {
    for (beta, q, p) in [(0.18, 3u32, 5.0), (0.26, 2, 3.2)] {
        let f = TestFunction::peak(beta, &[0.0], q, p, 0.0).unwrap();
        let e = 1.0 - 2.0 * q as f64 * beta;
        let mut last = 0.0;
        for delta in [1e-2, 1e-3, 1e-4] {
            let numeric = integrate(|x| f.eval(&[x]).powi(2 * q as i32), delta, 1.0, &[], 1e-10, DEFAULT_BUDGET).unwrap();
            let analytic = (delta.powf(e) - 1.0) / -e;
            assert!((numeric / analytic - 1.0).abs() < 0.05, "beta={beta} delta={delta}");
            assert!(numeric > last);
            last = numeric;
        }
    }
}

#[test]
fn cv_correction_is_conditionally_unbiased() {
    let f = TestFunction::one_plus_bump(1);
    let q = 2;
    let s1 = noiseless(&f, 64, 5);
    let fhat = regress::fit_grid_with(&s1, 16, EmptyCellPolicy::NearestFilled).unwrap();
    let control = fhat.moment(q, 0);
    let target = testfn::reference_moment(&f, q, 1e-12).unwrap() - control;
    let corrections: Vec<f64> = (0..2000)
        .map(|rep| {
            let s2 = noiseless(&f, 32, 10_000 + rep);
            estimators::cv_moment_with(&fhat, control, &s2, q).unwrap().params.correction.unwrap()
        })
        .collect();
    let mean = stats::mean(&corrections);
    assert!((mean - target).abs() <= 3.0 * stats::std_error(&corrections), "{mean} vs {target}");
}

#[test]
fn threshold_ordering_and_crossover() {
    let mut rng = RngStream::new(3, 3);
    for _ in 0..10_000 {
        let q = 2 + (rng.uniform() * 8.0) as u32;
        let lo = (q as f64).max(2.0);
        let p = lo + (0.001 + 0.998 * rng.uniform()) * (2.0 * q as f64 - lo);
        let d = 1 + (rng.uniform() * 5.0) as usize;
        let t = rate_theory::thresholds(p, q, d);
        assert!(t.method_transition < t.rate_transition && t.rate_transition < t.bounded);
        let (a, b) = rate_theory::moment_branches(t.rate_transition, p, q, d);
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaled_bump_vanishes_outside_its_cube(m in 1usize..12, j_frac in 0.0f64..1.0, d in 1usize..3, seed in any::<u64>()) {
        let count = m.pow(d as u32);
        let j = 1 + ((j_frac * count as f64) as usize).min(count - 1);
        let f = testfn::make_scaled_bump(m, j, 1.0, 4.0, d, AmplitudeExponent::LowerBoundCaseII).unwrap();
        let (grid, idx, _) = f.cube_params().unwrap();
        let (lo, hi) = grid.bounds(idx).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let inside = x.iter().zip(lo.iter().zip(&hi)).all(|(xi, (l, h))| xi > l && xi < h);
            if !inside {
                prop_assert_eq!(f.eval(&x), 0.0);
            }
        }
    }

    #[test]
    fn volumes_conserve_k_in_one_dimension(n in 4usize..200, seed in any::<u64>(), pick in 0usize..4) {
        let s = random_set(n, 1, seed);
        let k = [1, 2, 5, n / 2][pick].clamp(1, n);
        let r = KnnRegressor::fit(&s, k).unwrap();
        let v = r.exact_volumes().unwrap();
        prop_assert!((v.total() - k as f64).abs() < 1e-12);
    }

    #[test]
    fn volumes_conserve_k_in_two_dimensions(n in 10usize..80, seed in any::<u64>(), pick in 0usize..4) {
        let s = random_set(n, 2, seed);
        let k = [1, 2, 5, n / 2][pick];
        let r = KnnRegressor::fit(&s, k).unwrap();
        let v = r.probe_volumes(2000, &mut RngStream::new(seed, 9)).unwrap();
        let se = v.std_errors.iter().map(|e| e * e).sum::<f64>().sqrt();
        prop_assert!((v.total() - k as f64).abs() <= 3.0 * se + 1e-9);
    }

    #[test]
    fn every_probe_has_k_members(n in 2usize..120, d in 1usize..4, seed in any::<u64>(), kf in 0.0f64..1.0) {
        let s = random_set(n, d, seed);
        let k = 1 + ((kf * n as f64) as usize).min(n - 1);
        let r = KnnRegressor::fit(&s, k).unwrap();
        let mut rng = RngStream::new(seed, 5);
        for _ in 0..20 {
            let z: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let nb = r.neighbors(&z);
            prop_assert_eq!(nb.len(), k);
            let mut sorted = nb.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), k);
        }
    }

    #[test]
    fn knn_predictions_within_value_range(n in 2usize..100, d in 1usize..3, seed in any::<u64>(), kf in 0.0f64..1.0) {
        let s = random_set(n, d, seed);
        let k = 1 + ((kf * n as f64) as usize).min(n - 1);
        let r = KnnRegressor::fit(&s, k).unwrap();
        let lo = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = RngStream::new(seed, 6);
        for _ in 0..50 {
            let z: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let y = r.predict(&z);
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }

    #[test]
    fn permuted_training_order_predicts_the_same(n in 3usize..60, d in 1usize..3, seed in any::<u64>(), k in 1usize..3) {
        let s = random_set(n, d, seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = RngStream::new(seed, 8);
        for i in (1..n).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            order.swap(i, j.min(i));
        }
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| s.points.get(i).to_vec()).collect();
        let ys: Vec<f64> = order.iter().map(|&i| s.values[i]).collect();
        let permuted = SampleSet::from_parts(PointSet::from_rows(d, &rows).unwrap(), ys).unwrap();
        let a = KnnRegressor::fit(&s, k).unwrap();
        let b = KnnRegressor::fit(&permuted, k).unwrap();
        for _ in 0..30 {
            let z: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let mut na: Vec<usize> = a.neighbors(&z);
            let mut nb: Vec<usize> = b.neighbors(&z).iter().map(|&i| order[i]).collect();
            na.sort_unstable();
            nb.sort_unstable();
            prop_assert_eq!(na, nb);
            prop_assert!((a.predict(&z) - b.predict(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_is_idempotent_bounded_and_monotone(n in 1usize..50, q in 1u32..6, m in 0.01f64..20.0, extra in 0.0f64..20.0, seed in any::<u64>()) {
        let s = random_set(n, 1, seed);
        let h = estimators::truncated_mc_moment(&s, q, m).unwrap().value;
        prop_assert!(h.abs() <= m.powi(q as i32) * (1.0 + 1e-12));
        let clamped: Vec<f64> = s.values.iter().map(|y| y.clamp(-m, m)).collect();
        let again = SampleSet::from_parts(s.points.clone(), clamped).unwrap();
        let h2 = estimators::truncated_mc_moment(&again, q, m + extra).unwrap().value;
        prop_assert_eq!(h, h2);
        let positive = SampleSet::from_parts(s.points.clone(), s.values.iter().map(|y| y.abs()).collect()).unwrap();
        let small = estimators::truncated_mc_moment(&positive, q, m).unwrap().value;
        let large = estimators::truncated_mc_moment(&positive, q, m + extra).unwrap().value;
        prop_assert!(small <= large);
    }

    #[test]
    fn zero_regressor_is_plain_mc(n in 4usize..100, q in 1u32..5, seed in any::<u64>()) {
        let s = random_set(n, 1, seed);
        let (_, s2) = split_halves(&s).unwrap();
        let zero = estimators::cv_moment_with(&regress::ZeroPredictor(1), 0.0, &s2, q).unwrap();
        let plain = estimators::plain_mc_moment(&s2, q).unwrap();
        prop_assert!((zero.value - plain.value).abs() <= 1e-12 * plain.value.abs().max(1.0));
    }

    #[test]
    fn direct_and_weights_forms_agree(n in 4usize..200, seed in any::<u64>(), kf in 0.0f64..1.0) {
        let s = random_set(n, 1, seed);
        let k = 1 + ((kf * (n / 2) as f64) as usize).min(n / 2 - 1);
        let a = estimators::integral_knn_quadrature(&s, k).unwrap();
        let b = estimators::integral_weights_form(&s, k).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-10);
    }

    #[test]
    fn grid_predictions_are_cell_means(n in 1usize..100, cells in 1usize..20, seed in any::<u64>()) {
        let s = random_set(n, 1, seed);
        let g = regress::fit_grid(&s, cells).unwrap();
        let lo = s.values.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
        let hi = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        for i in 0..=50 {
            let y = g.value(&[i as f64 / 50.0]);
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }
}
