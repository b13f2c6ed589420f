//! Adaptive Gauss–Kronrod quadrature on intervals and boxes.
//!
//! The 1-D driver bisects the segment with the largest `|K15 - G7|` until the
//! summed error estimate falls below the absolute tolerance. Boxes are
//! integrated as nested 1-D integrals, optionally split at caller-supplied
//! breakpoints so that kinks and excluded regions never sit inside a panel.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Default cap on the number of panels a single 1-D integral may use.
pub const DEFAULT_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `breaks` are interior points where the integrand may be non-smooth; they
/// seed the initial panel list.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64, budget: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > lo && t < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in edges.windows(2) {
        let p = kronrod15(&mut f, w[0], w[1]);
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    let mut previous = f64::NAN;
    while err > tol {
        // Rounding floor: further bisection cannot help.
        if err <= 50.0 * f64::EPSILON * total.abs().max(1e-300) {
            break;
        }
        if heap.len() >= budget {
            return Err(Error::QuadratureNonConvergence { budget, previous: sign * previous, last: sign * total });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        previous = total;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation in the running total.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let sum: f64 = panels.iter().map(|p| p.value).sum();
    if !sum.is_finite() {
        return Err(Error::NonFinite(format!("integral over [{lo}, {hi}] is {sum}")));
    }
    Ok(sign * sum)
}

/// Integrates `f` over the box `[lo, hi]` as nested 1-D integrals.
///
/// `breaks(axis, prefix)` returns interior breakpoints on `axis` given the
/// already-fixed leading coordinates. The absolute tolerance is split evenly
/// between each level and the one below it.
pub fn integrate_box<F, B>(f: &F, lo: &[f64], hi: &[f64], tol: f64, breaks: &B) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    B: Fn(usize, &[f64]) -> Vec<f64>,
{
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
    }
    nested(f, lo, hi, &[], tol, breaks)
}

fn nested<F, B>(f: &F, lo: &[f64], hi: &[f64], prefix: &[f64], tol: f64, breaks: &B) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    B: Fn(usize, &[f64]) -> Vec<f64>,
{
    let axis = prefix.len();
    if axis == lo.len() {
        return Ok(f(prefix));
    }
    let cuts = breaks(axis, prefix);
    if axis + 1 == lo.len() {
        let buf = RefCell::new(prefix.to_vec());
        return integrate(
            |t| {
                let mut b = buf.borrow_mut();
                b.push(t);
                let v = f(&b);
                b.pop();
                v
            },
            lo[axis],
            hi[axis],
            &cuts,
            tol,
            DEFAULT_BUDGET,
        );
    }
    let width = (hi[axis] - lo[axis]).abs().max(1e-300);
    let inner_tol = 0.5 * tol / width;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let base = prefix.to_vec();
    let outer = integrate(
        |t| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            let mut p = base.clone();
            p.push(t);
            match nested(f, lo, hi, &p, inner_tol, breaks) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        lo[axis],
        hi[axis],
        &cuts,
        0.5 * tol,
        DEFAULT_BUDGET,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    outer
}

/// Tensor-product midpoint rule with `res` nodes per axis on `[0,1]^dim`.
pub fn tensor_midpoint<F: FnMut(&[f64]) -> f64>(dim: usize, res: usize, mut f: F) -> f64 {
    let total = res.pow(dim as u32);
    let h = 1.0 / res as f64;
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut sum = 0.0;
    for _ in 0..total {
        for (p, &i) in point.iter_mut().zip(idx.iter()) {
            *p = (i as f64 + 0.5) * h;
        }
        sum += f(&point);
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < res {
                break;
            }
            idx[a] = 0;
        }
    }
    sum / total as f64
}
