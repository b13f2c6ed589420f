//! Numerical checks of the two-prior lower-bound constructions.
//!
//! Case I mixes the zero function with a single cube bump `g_1`; the data
//! only distinguish the two arms when a sample lands in that cube, which
//! gives a closed-form KL divergence. Case II perturbs the constant `M` by
//! `±f_j` on every cube with slightly biased signs; Hoeffding's inequality
//! keeps the sign sums apart. Everything here is a computable fact about
//! those constructions: probabilities, divergences, norms and separations.

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_box, tensor_midpoint};
use crate::sampling::RngStream;
use crate::stats;
use crate::testfn::{self, AmplitudeExponent, PriorCase, PriorSpec};

const BLOCK: usize = 10_000;

/// `1 - (1 - 1/cubes)^n`.
pub fn hit_probability(n: usize, cubes: usize) -> f64 {
    -((n as f64) * (-1.0 / cubes as f64).ln_1p()).exp_m1()
}

/// The uniform ceiling `1 - (2e)^{-1/200}` on the hit probability with `200n` cubes.
pub fn hit_ceiling() -> f64 {
    1.0 - (2.0 * std::f64::consts::E).powf(-1.0 / 200.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlBound {
    pub hit: f64,
    pub kl: f64,
    /// Pinsker bound `sqrt(kl / 2)` on total variation.
    pub tv_bound: f64,
}

/// Closed-form Case I divergence with `200n` cubes.
pub fn kl_bound_case1(n: usize, eps: f64) -> Result<KlBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1), got {eps}")));
    }
    let hit = hit_probability(n, 200 * n);
    let kl = if eps == 0.0 { 0.0 } else { eps * ((1.0 + eps) / (1.0 - eps)).ln() * hit };
    Ok(KlBound { hit, kl, tv_bound: (kl / 2.0).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSimulation {
    pub kl: f64,
    pub kl_se: f64,
    pub tv: f64,
    pub tv_se: f64,
    pub trials: usize,
}

/// Simulated Case I divergence between the arm-0 and arm-1 data laws.
pub fn empirical_kl_case1(n: usize, eps: f64, trials: usize, rng: &mut RngStream) -> Result<KlSimulation> {
    empirical_kl_two_point(n, (1.0 - eps) / 2.0, (1.0 + eps) / 2.0, trials, rng)
}

/// Simulated divergence when arm `a` includes the bump with probability
/// `bump[a]`. Each trial draws `n` uniform points, checks whether any falls
/// in the bump's cube, draws the arm-0 function and accumulates the
/// log-likelihood ratio of what was observed.
pub fn empirical_kl_two_point(n: usize, bump0: f64, bump1: f64, trials: usize, rng: &mut RngStream) -> Result<KlSimulation> {
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 trials, got {trials}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    for p in [bump0, bump1] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("arm probabilities must lie in (0, 1), got {p}")));
        }
    }
    let width = 1.0 / (200 * n) as f64;
    let llr_on = (bump0 / bump1).ln();
    let llr_off = ((1.0 - bump0) / (1.0 - bump1)).ln();
    let seed = rng.next_u64();
    let blocks = trials.div_ceil(BLOCK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = RngStream::new(seed, b as u64);
            let count = BLOCK.min(trials - b * BLOCK);
            let mut llr = Vec::with_capacity(count);
            let mut tv = Vec::with_capacity(count);
            for _ in 0..count {
                let hit = (0..n).any(|_| r.uniform() < width);
                let on = r.uniform() < bump0;
                let v = if !hit {
                    0.0
                } else if on {
                    llr_on
                } else {
                    llr_off
                };
                llr.push(v);
                tv.push((1.0 - (-v).exp()).max(0.0));
            }
            (llr, tv)
        })
        .collect();
    let (llr, tv): (Vec<f64>, Vec<f64>) = parts.into_iter().fold((vec![], vec![]), |mut acc, (a, b)| {
        acc.0.extend(a);
        acc.1.extend(b);
        acc
    });
    Ok(KlSimulation { kl: stats::mean(&llr), kl_se: stats::std_error(&llr), tv: stats::mean(&tv), tv_se: stats::std_error(&tv), trials })
}

/// `exp(-lambda^2 kappa^2 cubes / 2)`.
pub fn hoeffding_tail_bound(kappa: f64, lambda: f64, cubes: usize) -> f64 {
    (-hoeffding_exponent(kappa, lambda, cubes)).exp()
}

pub fn hoeffding_exponent(kappa: f64, lambda: f64, cubes: usize) -> f64 {
    lambda * lambda * kappa * kappa * cubes as f64 / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTail {
    /// Empirical probability that the sign sum crosses into the other arm's side.
    pub tail: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingReport {
    pub cubes: usize,
    pub bound: f64,
    pub arms: [ArmTail; 2],
    pub pass: bool,
}

/// Simulates the Case II sign sums `Σ_j η_j` under both arms.
///
/// Arm 0 has mean `-κ m^d`; its tail is `P(Σ >= -(1-λ) m^d κ)`. Arm 1 is the
/// mirror image. Both must sit below the Hoeffding bound plus 3 SE.
pub fn hoeffding_separation_check(spec: &PriorSpec, trials: usize, rng: &mut RngStream) -> Result<HoeffdingReport> {
    if spec.case != PriorCase::CaseII {
        return Err(Error::InvalidParameter("the Hoeffding check needs a Case II spec".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let cubes = spec.cube_count();
    let kappa = spec.kappa();
    let lambda = spec.lambda();
    let bound = hoeffding_tail_bound(kappa, lambda, cubes);
    let edge = (1.0 - lambda) * cubes as f64 * kappa;
    let seed = rng.next_u64();
    let mut arms = [ArmTail { tail: 0.0, se: 0.0 }; 2];
    for (arm, slot) in arms.iter_mut().enumerate() {
        let pm = spec.minus_probability(arm);
        let binom = Binomial::new(cubes as u64, pm).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let blocks = trials.div_ceil(BLOCK);
        let hits: usize = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut r = RngStream::new(seed, ((arm as u64) << 32) | b as u64);
                let count = BLOCK.min(trials - b * BLOCK);
                (0..count)
                    .filter(|_| {
                        let minus = binom.sample(&mut r) as f64;
                        let sum = cubes as f64 - 2.0 * minus;
                        if arm == 0 {
                            sum >= -edge
                        } else {
                            sum <= edge
                        }
                    })
                    .count()
            })
            .sum();
        let tail = hits as f64 / trials as f64;
        *slot = ArmTail { tail, se: (tail * (1.0 - tail) / trials as f64).sqrt() };
    }
    let pass = arms.iter().all(|a| a.tail <= bound + 3.0 * a.se.max(1.0 / trials as f64));
    Ok(HoeffdingReport { cubes, bound, arms, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// `∫_{Ω_j} (M + f_j)^q`
    pub a: f64,
    /// `∫_{Ω_j} (M - f_j)^q`
    pub b: f64,
    /// `A - B`, integrated directly.
    pub delta: f64,
    /// `q M^{q-1} / 2^{q-2} · m^{-s-d} ‖K‖_{L^1}`
    pub lower_bound: f64,
}

/// Per-cube separation of the Case II moments.
pub fn case2_separation(spec: &PriorSpec, tol: f64) -> Result<Separation> {
    if spec.case != PriorCase::CaseII {
        return Err(Error::InvalidParameter("separation needs a Case II spec".into()));
    }
    let grid = spec.grid();
    let offset = spec.offset();
    let amp = spec.amplitude();
    let q = spec.q;
    let a = testfn::cube_moment(grid, offset, amp, q, tol)?;
    let b = testfn::cube_moment(grid, offset, -amp, q, tol)?;
    let center = grid.center(1)?;
    let (lo, hi) = grid.bounds(1)?;
    let m = grid.m as f64;
    let qi = q as i32;
    let diff = |x: &[f64]| {
        let u: Vec<f64> = x.iter().zip(&center).map(|(xi, ci)| m * (xi - ci)).collect();
        let f = amp * testfn::bump_k(&u);
        (offset + f).powi(qi) - (offset - f).powi(qi)
    };
    let delta = integrate_box(&diff, &lo, &hi, tol, &|axis, _: &[f64]| vec![center[axis]])?;
    let c0 = q as f64 * offset.powi(qi - 1) / 2f64.powi(qi - 2);
    let lower_bound = c0 * m.powf(-spec.s - spec.d as f64) * testfn::bump_power_integral(1, spec.d)?;
    Ok(Separation { a, b, delta, lower_bound })
}

/// Case I target separation `I_{g_1}^q / 2`.
pub fn case1_separation(spec: &PriorSpec, tol: f64) -> Result<f64> {
    let g1 = testfn::prior_case1(spec, true)?;
    Ok(testfn::reference_moment(&g1, spec.q, tol)? / 2.0)
}

/// Closed form `m^{-q(s - d/p) - d} ‖K‖_{L^q}^q / 2` of [`case1_separation`].
pub fn case1_separation_formula(spec: &PriorSpec) -> Result<f64> {
    let m = spec.m() as f64;
    let (q, d) = (spec.q as f64, spec.d as f64);
    Ok(m.powf(-q * (spec.s - d / spec.p) - d) * testfn::bump_power_integral(spec.q, spec.d)? / 2.0)
}

/// `‖D^t f‖_{L^p}` over the bump's cube, with the order-`t` derivative taken
/// along the first axis by central differences at step `1e-5 / m`.
pub fn bump_derivative_norm(m: usize, s: f64, p: f64, d: usize, t: u32, amplitude: AmplitudeExponent) -> Result<f64> {
    if t > 2 {
        return Err(Error::Unsupported(format!("derivative order {t} exceeds the supported maximum of 2")));
    }
    let f = testfn::make_scaled_bump(m, 1, s, p, d, amplitude)?;
    let h = 1e-5 / m as f64;
    let deriv = |x: &[f64]| -> f64 {
        match t {
            0 => f.eval(x),
            _ => {
                let mut plus = x.to_vec();
                let mut minus = x.to_vec();
                plus[0] += h;
                minus[0] -= h;
                if t == 1 {
                    (f.eval(&plus) - f.eval(&minus)) / (2.0 * h)
                } else {
                    (f.eval(&plus) - 2.0 * f.eval(x) + f.eval(&minus)) / (h * h)
                }
            }
        }
    };
    // The integrand is smooth and flat at the cube faces, so the midpoint
    // rule converges faster than any power of the node count.
    let res = match d {
        1 => 4000,
        2 => 400,
        _ => 60,
    };
    let mf = m as f64;
    let (lo, _) = f.cube_params().map(|(g, j, _)| g.bounds(j)).expect("scaled bump")?;
    let mean = tensor_midpoint(d, res, |u| {
        let x: Vec<f64> = u.iter().zip(&lo).map(|(ui, li)| li + ui / mf).collect();
        deriv(&x).abs().powf(p)
    });
    let norm = (mean * mf.powi(-(d as i32))).powf(1.0 / p);
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("derivative norm for m = {m}, t = {t}")));
    }
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub t: u32,
    pub ms: Vec<usize>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub expected: f64,
    pub pass: bool,
}

/// Fits the log-log slope of `‖D^t g‖_{L^p}` against `m` for the Case I
/// bump `m^{-s+d/p} K(m(x - c))`; the expected slope is `t - s`.
pub fn sobolev_scaling_check(s: f64, p: f64, t: u32, ms: &[usize]) -> Result<ScalingReport> {
    scaling_check(s, p, 1, t, ms, AmplitudeExponent::LowerBoundCaseI)
}

/// As [`sobolev_scaling_check`] for either amplitude convention. Case II
/// bumps `m^{-s} K(m(x - c))` scale with slope `t - s - d/p`.
pub fn scaling_check(s: f64, p: f64, d: usize, t: u32, ms: &[usize], amplitude: AmplitudeExponent) -> Result<ScalingReport> {
    if ms.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 values of m".into()));
    }
    let norms = ms.iter().map(|&m| bump_derivative_norm(m, s, p, d, t, amplitude)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let fit = stats::fit_loglog(&xs, &norms).ok_or_else(|| Error::NonFinite("derivative norms".into()))?;
    let expected = match amplitude {
        AmplitudeExponent::LowerBoundCaseI => t as f64 - s,
        AmplitudeExponent::LowerBoundCaseII => t as f64 - s - d as f64 / p,
    };
    Ok(ScalingReport { t, ms: ms.to_vec(), norms, slope: fit.slope, expected, pass: (fit.slope - expected).abs() <= 0.05 })
}

/// KL between `n` Gaussian observations shifted by `n^{-γ-1/2}` with noise
/// scale `n^{-γ}`; equal to 1/2 for every `n` and `γ`.
pub fn gaussian_shift_kl(n: usize, gamma: f64) -> f64 {
    let nf = n as f64;
    let shift = nf.powf(-gamma - 0.5);
    let var = nf.powf(-2.0 * gamma);
    nf * shift * shift / (2.0 * var)
}

/// Settings for the bundled check suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabConfig {
    pub seed: u64,
    pub kl_trials: usize,
    pub hoeffding_trials: usize,
    pub hoeffding_n: usize,
    /// Deliberately corrupts one reference constant (for exercising failure paths).
    pub tamper: Option<String>,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self { seed: crate::DEFAULT_SEED, kl_trials: 1_000_000, hoeffding_trials: 100_000, hoeffding_n: 64, tamper: None }
    }
}

/// How a check compares `value` with `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value - reference| <= tolerance`
    Within,
    /// `value <= reference + tolerance`
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabCheck {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub checks: Vec<LabCheck>,
}

impl LabReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs the full suite. A check named in `cfg.tamper` has its reference
/// value perturbed so that it fails.
pub fn run_lab(cfg: &LabConfig) -> Result<LabReport> {
    if cfg.kl_trials < 1000 || cfg.hoeffding_trials < 1000 {
        return Err(Error::InvalidParameter("lab trial counts must be at least 1000".into()));
    }
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, relation: Relation, reference: f64, tolerance: f64| {
        let reference = if cfg.tamper.as_deref() == Some(name) {
            match relation {
                Relation::Within => reference * 1.01 + 1e-3,
                Relation::AtMost => value - tolerance - 1e-3 * value.abs().max(1.0),
            }
        } else {
            reference
        };
        let pass = match relation {
            Relation::Within => (value - reference).abs() <= tolerance,
            Relation::AtMost => value <= reference + tolerance,
        };
        checks.push(LabCheck { name: name.to_string(), value, relation, reference, tolerance, pass });
    };
    let mut rng = RngStream::new(cfg.seed, 0);

    let closed = kl_bound_case1(1, 0.5)?;
    push("case1_kl_closed_form", closed.kl, Relation::Within, 0.5 * 3f64.ln() / 200.0, 1e-15);

    let worst = (1..=10_000).map(|n| hit_probability(n, 200 * n)).fold(0.0, f64::max);
    push("case1_hit_ceiling", worst, Relation::AtMost, hit_ceiling(), 0.0);

    let sim = empirical_kl_case1(1, 0.5, cfg.kl_trials, &mut rng)?;
    push("case1_kl_simulation", sim.kl, Relation::Within, closed.kl, 3.0 * sim.kl_se);
    push("pinsker_closed_form", closed.tv_bound.powi(2), Relation::AtMost, closed.kl / 2.0, 1e-18);
    push("pinsker_simulation", sim.tv, Relation::AtMost, closed.tv_bound, 3.0 * sim.tv_se);

    let target = (-50.0f64 / 27.0).exp();
    for n in [1usize, 10, 1000] {
        let spec = PriorSpec::new(PriorCase::CaseII, n, 1.0, 4.0, 3, 1, 0.5)?;
        let b = hoeffding_tail_bound(spec.kappa(), spec.lambda(), spec.cube_count());
        push(&format!("hoeffding_constant_n{n}"), b, Relation::Within, target, 1e-10);
    }
    let spec = PriorSpec::new(PriorCase::CaseII, cfg.hoeffding_n, 1.0, 4.0, 3, 1, 0.5)?;
    let hoeff = hoeffding_separation_check(&spec, cfg.hoeffding_trials, &mut rng)?;
    for (arm, t) in hoeff.arms.iter().enumerate() {
        let se = t.se.max(1.0 / cfg.hoeffding_trials as f64);
        push(&format!("hoeffding_tail_arm{arm}"), t.tail, Relation::AtMost, hoeff.bound, 3.0 * se);
    }

    for t in 0..=2 {
        let r = sobolev_scaling_check(1.0, 4.0, t, &[2, 4, 8, 16, 32])?;
        push(&format!("sobolev_scaling_t{t}"), r.slope, Relation::Within, r.expected, 0.05);
    }

    for q in 1..=3u32 {
        let sep = case2_separation_at(4, 1.0, q, 1e-13)?;
        let oracle = case2_oracle(q, 3.0 * (-1f64).exp(), 4, 1.0)?;
        push(&format!("case2_separation_q{q}"), sep.delta, Relation::Within, oracle, 1e-8);
        push(&format!("case2_lower_bound_q{q}"), sep.lower_bound, Relation::AtMost, sep.delta, 1e-12 * sep.delta);
    }

    let c1 = PriorSpec::new(PriorCase::CaseI, 1, 0.5, 4.0, 3, 1, 0.5)?;
    push("case1_separation", case1_separation(&c1, 1e-14)?, Relation::Within, case1_separation_formula(&c1)?, 1e-8);

    push("gaussian_shift_kl", gaussian_shift_kl(1000, 0.3), Relation::Within, 0.5, 1e-12);
    if let Some(name) = &cfg.tamper {
        if !checks.iter().any(|c| &c.name == name) {
            return Err(Error::Config(format!("tamper names no check: {name}")));
        }
    }
    Ok(LabReport { checks })
}

/// Case II separation on an explicit `m`-cube grid in one dimension.
pub fn case2_separation_at(m: usize, s: f64, q: u32, tol: f64) -> Result<Separation> {
    // n = m / 200 would round; build the grid directly instead.
    let offset = 3.0 * (-1f64).exp();
    let amp = (m as f64).powf(-s);
    let grid = testfn::CubeGrid { m, dim: 1 };
    let a = testfn::cube_moment(grid, offset, amp, q, tol)?;
    let b = testfn::cube_moment(grid, offset, -amp, q, tol)?;
    let c = grid.center(1)?[0];
    let (lo, hi) = grid.bounds(1)?;
    let qi = q as i32;
    let mf = m as f64;
    let delta = crate::quadrature::integrate(
        |x| {
            let f = amp * testfn::bump_k(&[mf * (x - c)]);
            (offset + f).powi(qi) - (offset - f).powi(qi)
        },
        lo[0],
        hi[0],
        &[c],
        tol,
        crate::quadrature::DEFAULT_BUDGET,
    )?;
    let c0 = q as f64 * offset.powi(qi - 1) / 2f64.powi(qi - 2);
    let lower_bound = c0 * mf.powf(-s - 1.0) * testfn::bump_power_integral(1, 1)?;
    Ok(Separation { a, b, delta, lower_bound })
}

/// Binomial-expansion value of `A - B` in one dimension:
/// `Σ_{odd i} 2 C(q,i) M^{q-i} ∫ f^i` with `∫ f^i = m^{-i s - 1} ‖K‖_i^i`.
pub fn case2_oracle(q: u32, offset: f64, m: usize, s: f64) -> Result<f64> {
    let mf = m as f64;
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=q {
        if i > 0 {
            binom = binom * (q - i + 1) as f64 / i as f64;
        }
        if i % 2 == 1 {
            let moment = mf.powf(-(i as f64) * s - 1.0) * testfn::bump_power_integral(i, 1)?;
            total += 2.0 * binom * offset.powi((q - i) as i32) * moment;
        }
    }
    Ok(total)
}
