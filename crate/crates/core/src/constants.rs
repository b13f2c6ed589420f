//! Pinned L^q norms of the bump profile `K`.
//!
//! `K` has no closed-form norms, so they are computed once by adaptive
//! quadrature (see the `pin_bump_norms` example) and stored in
//! `data/bump_norms.txt` as `name=value` lines.

use std::collections::HashMap;
use std::sync::OnceLock;

const BUMP_NORMS: &str = include_str!("../data/bump_norms.txt");

fn table() -> &'static HashMap<String, f64> {
    static TABLE: OnceLock<HashMap<String, f64>> = OnceLock::new();
    TABLE.get_or_init(|| parse(BUMP_NORMS))
}

/// Parses `name=value` lines, skipping blanks and `#` comments.
pub fn parse(text: &str) -> HashMap<String, f64> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().parse().ok()?))
        })
        .collect()
}

pub fn bump_norm_key(q: u32, d: usize) -> String {
    format!("k_norm_q{q}_d{d}")
}

/// `‖K‖_{L^q}` in dimension `d`, when pinned (`q` in 1..=6, `d` in 1..=2).
pub fn bump_norm(q: u32, d: usize) -> Option<f64> {
    table().get(&bump_norm_key(q, d)).copied()
}

/// `‖K‖_{L^q}^q`, falling back to the product structure for unpinned `d`.
pub fn bump_power_integral(q: u32, d: usize) -> Option<f64> {
    if let Some(v) = bump_norm(q, d) {
        return Some(v.powi(q as i32));
    }
    bump_norm(q, 1).map(|v| v.powi(q as i32).powi(d as i32))
}
