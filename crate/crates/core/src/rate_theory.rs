//! Closed-form convergence exponents, regime classification and parameter
//! schedules.
//!
//! All exponents are powers of `n`: an estimator with exponent `-0.75` has
//! error decaying like `n^{-0.75}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Checks `p > 2`, `q < p < 2q`, `s >= 0`, `d >= 1`.
pub fn check_standing(s: f64, p: f64, q: u32, d: usize) -> Result<()> {
    let qf = q as f64;
    if d == 0 {
        return Err(Error::AssumptionViolated("d >= 1".into()));
    }
    if !(s >= 0.0) {
        return Err(Error::AssumptionViolated(format!("s >= 0 (got s = {s})")));
    }
    if !(p > 2.0) {
        return Err(Error::AssumptionViolated(format!("p > 2 (got p = {p})")));
    }
    if !(qf < p) {
        return Err(Error::AssumptionViolated(format!("q < p (got q = {q}, p = {p})")));
    }
    if !(p < 2.0 * qf) {
        return Err(Error::AssumptionViolated(format!("p < 2q (got q = {q}, p = {p})")));
    }
    Ok(())
}

/// Minimax exponent for the `q`-th moment: `max{-q(s/d - 1/p) - 1, -s/d - 1/2}`.
pub fn moment_exponent(s: f64, p: f64, q: u32, d: usize) -> Result<f64> {
    check_standing(s, p, q, d)?;
    let (heavy, smooth) = moment_branches(s, p, q, d);
    Ok(heavy.max(smooth))
}

/// The two branches of [`moment_exponent`], unchecked.
pub fn moment_branches(s: f64, p: f64, q: u32, d: usize) -> (f64, f64) {
    let r = s / d as f64;
    (-(q as f64) * (r - 1.0 / p) - 1.0, -r - 0.5)
}

/// Minimax exponent for the integral under noise `n^{-gamma}`:
/// `max{-1/2 - gamma, -1/2 - s/d}`.
pub fn integral_exponent(s: f64, d: usize, gamma: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::AssumptionViolated(format!("s > 0 (got s = {s})")));
    }
    if d == 0 {
        return Err(Error::AssumptionViolated("d >= 1".into()));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise exponent must be in [0, inf], got {gamma}")));
    }
    Ok((-0.5 - gamma).max(-0.5 - s / d as f64))
}

/// Exponent of truncated Monte Carlo on a peak `‖x - x0‖^{-beta}` with
/// truncation `M ∝ n^beta`: `q·beta - 1`.
pub fn peak_truncated_exponent(beta: f64, q: u32) -> f64 {
    q as f64 * beta - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `s > d/p`: bounded functions.
    CaseI,
    /// `d(2q-p)/(p(2q-2)) < s < d/p`.
    CaseII,
    /// `d(2q-p)/(2pq) < s < d(2q-p)/(p(2q-2))`.
    CaseIII,
    /// `s < d(2q-p)/(2pq)`: infinite-variance peaks are possible.
    RareEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecommendedMethod {
    CV,
    TruncatedMC,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `d/p`
    pub bounded: f64,
    /// `d(2q-p)/(p(2q-2))`, where the optimal rate changes branch.
    pub rate_transition: f64,
    /// `d(2q-p)/(2pq)`, where the recommended method changes.
    pub method_transition: f64,
}

pub fn thresholds(p: f64, q: u32, d: usize) -> Thresholds {
    let (d, q) = (d as f64, q as f64);
    Thresholds {
        bounded: d / p,
        rate_transition: d * (2.0 * q - p) / (p * (2.0 * q - 2.0)),
        method_transition: d * (2.0 * q - p) / (2.0 * p * q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub thresholds: Thresholds,
    pub recommended: RecommendedMethod,
    pub exponent: f64,
    /// `s` sits exactly on a threshold and was assigned the higher regime.
    pub on_boundary: bool,
}

pub fn regime(s: f64, p: f64, q: u32, d: usize) -> Result<RegimeReport> {
    let exponent = moment_exponent(s, p, q, d)?;
    let t = thresholds(p, q, d);
    let (regime, on_boundary) = if s >= t.bounded {
        (Regime::CaseI, s == t.bounded)
    } else if s >= t.rate_transition {
        (Regime::CaseII, s == t.rate_transition)
    } else if s >= t.method_transition {
        (Regime::CaseIII, s == t.method_transition)
    } else {
        (Regime::RareEvent, false)
    };
    let recommended = if regime == Regime::RareEvent { RecommendedMethod::TruncatedMC } else { RecommendedMethod::CV };
    Ok(RegimeReport { regime, thresholds: t, recommended, exponent, on_boundary })
}

/// Neighbour count `clamp(round(c · n^{2(s - gamma d)/(d + 2s)}), 1, n/2)`
/// when `gamma < s/d`, else 1.
pub fn optimal_k_scaled(n: usize, s: f64, d: usize, gamma: f64, c: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("k schedule needs s in (0, 1), got {s}")));
    }
    if !(gamma >= 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma >= 0 and c > 0, got {gamma}, {c}")));
    }
    let df = d as f64;
    if gamma >= s / df {
        return Ok(1);
    }
    let expo = 2.0 * (s - gamma * df) / (df + 2.0 * s);
    let k = (c * (n as f64).powf(expo)).round() as usize;
    Ok(k.clamp(1, (n / 2).max(1)))
}

pub fn optimal_k(n: usize, s: f64, d: usize, gamma: f64) -> Result<usize> {
    optimal_k_scaled(n, s, d, gamma, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moment_exponent_examples() {
        assert!((moment_exponent(2.0, 4.0, 3, 1).unwrap() + 2.5).abs() < 1e-15);
        assert!((moment_exponent(0.05, 4.0, 3, 1).unwrap() + 0.4).abs() < 1e-12);
        let (a, b) = moment_branches(0.125, 4.0, 3, 1);
        assert!((a + 0.625).abs() < 1e-12 && (b + 0.625).abs() < 1e-12);
    }

    #[test]
    fn standing_assumptions_named() {
        let err = moment_exponent(1.0, 2.0, 3, 1).unwrap_err();
        assert!(err.to_string().contains("p > 2"));
        assert!(moment_exponent(1.0, 7.0, 3, 1).unwrap_err().to_string().contains("p < 2q"));
        assert!(moment_exponent(1.0, 3.0, 3, 1).unwrap_err().to_string().contains("q < p"));
        assert!(moment_exponent(-1.0, 4.0, 3, 1).is_err());
    }

    #[test]
    fn integral_exponent_examples() {
        assert_eq!(integral_exponent(1.0, 1, 0.0).unwrap(), -0.5);
        assert_eq!(integral_exponent(1.0, 1, f64::INFINITY).unwrap(), -1.5);
        assert!((integral_exponent(0.8, 2, 0.4).unwrap() + 0.9).abs() < 1e-15);
    }

    #[test]
    fn regime_examples() {
        let a = regime(2.0, 4.0, 3, 1).unwrap();
        assert_eq!((a.regime, a.recommended), (Regime::CaseI, RecommendedMethod::CV));
        let b = regime(0.15, 4.0, 3, 1).unwrap();
        assert_eq!((b.regime, b.recommended), (Regime::CaseII, RecommendedMethod::CV));
        let c = regime(0.1, 4.0, 3, 1).unwrap();
        assert_eq!(c.regime, Regime::CaseIII);
        let e = regime(0.05, 4.0, 3, 1).unwrap();
        assert_eq!((e.regime, e.recommended), (Regime::RareEvent, RecommendedMethod::TruncatedMC));
    }

    #[test]
    fn boundary_goes_up_with_flag() {
        let r = regime(0.25, 4.0, 3, 1).unwrap();
        assert_eq!(r.regime, Regime::CaseI);
        assert!(r.on_boundary);
        let t = thresholds(4.0, 3, 1);
        let m = regime(t.method_transition, 4.0, 3, 1).unwrap();
        assert_eq!((m.regime, m.recommended, m.on_boundary), (Regime::CaseIII, RecommendedMethod::CV, true));
    }

    #[test]
    fn optimal_k_examples() {
        let k = optimal_k(729, 0.999, 1, 0.0).unwrap();
        assert!((80..=82).contains(&k), "{k}");
        assert_eq!(optimal_k(1000, 0.5, 1, 0.5).unwrap(), 1);
        assert_eq!(optimal_k(2, 0.9, 1, 0.0).unwrap(), 1);
        assert!(optimal_k(1, 0.5, 1, 0.0).is_err());
    }

    #[test]
    fn peak_exponent() {
        assert!((peak_truncated_exponent(0.18, 3) + 0.46).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn moment_exponent_nonincreasing_in_s(s in 0.0f64..3.0, ds in 0.0f64..1.0, q in 2u32..8, frac in 0.01f64..0.99, d in 1usize..4) {
            let lo = (q as f64).max(2.0);
            let p = lo + frac * (2.0 * q as f64 - lo);
            prop_assume!(check_standing(s, p, q, d).is_ok());
            let a = moment_exponent(s, p, q, d).unwrap();
            let b = moment_exponent(s + ds, p, q, d).unwrap();
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn integral_exponent_at_zero_noise(s in 1e-6f64..10.0, d in 1usize..5) {
            prop_assert_eq!(integral_exponent(s, d, 0.0).unwrap(), -0.5);
        }

        #[test]
        fn integral_exponent_monotone(s in 0.01f64..3.0, g in 0.0f64..3.0, ds in 0.0f64..1.0, dg in 0.0f64..1.0, d in 1usize..4) {
            let base = integral_exponent(s, d, g).unwrap();
            prop_assert!(integral_exponent(s + ds, d, g).unwrap() <= base);
            prop_assert!(integral_exponent(s, d, g + dg).unwrap() <= base);
        }
    }
}
