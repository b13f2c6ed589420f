//! Test functions on the unit cube: bump profiles, cube-localized bumps,
//! samples from the two lower-bound priors, power-law peaks and a few smooth
//! integrands, each with a ground-truth moment oracle.
//!
//! The bump profile is `K0(x) = prod_i exp(-1/(1 - x_i^2))` on `[-1,1]^d`
//! (zero on and outside the boundary) and `K(x) = K0(2x)`, supported on
//! `[-1/2,1/2]^d`. The cube is cut into `m^d` congruent cubes indexed
//! row-major from 1, with centers at the cube midpoints.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_box, DEFAULT_BUDGET};
use crate::regress::Predictor;
use crate::sampling::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionKind {
    BumpBase,
    ScaledBump,
    PriorSample,
    Peak,
    Smooth,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpVariant {
    K0,
    K,
}

/// Amplitude convention of a cube bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeExponent {
    /// `m^{-s + d/p}`
    LowerBoundCaseI,
    /// `m^{-s}`
    LowerBoundCaseII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothKind {
    /// `2 + prod_i sin(2 pi x_i)`
    SinePlusTwo,
    /// `1 + K(x - 1/2)`
    OnePlusBump,
    /// `sum_i x_i`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorCase {
    CaseI,
    CaseII,
}

/// The `m^d` cube grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeGrid {
    pub m: usize,
    pub dim: usize,
}

impl CubeGrid {
    pub fn count(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Per-axis integer coordinates of the 1-based cube index `j`.
    pub fn axes(&self, j: usize) -> Result<Vec<usize>> {
        let count = self.count();
        if j == 0 || j > count {
            return Err(Error::InvalidCubeIndex { index: j, count });
        }
        let mut rest = j - 1;
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = rest % self.m;
            rest /= self.m;
        }
        Ok(out)
    }

    pub fn center(&self, j: usize) -> Result<Vec<f64>> {
        let h = 1.0 / self.m as f64;
        Ok(self.axes(j)?.into_iter().map(|i| (i as f64 + 0.5) * h).collect())
    }

    /// Lower and upper corners of cube `j`.
    pub fn bounds(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = 1.0 / self.m as f64;
        let axes = self.axes(j)?;
        let lo = axes.iter().map(|&i| i as f64 * h).collect();
        let hi = axes.iter().map(|&i| (i + 1) as f64 * h).collect();
        Ok((lo, hi))
    }

    /// 1-based index of the cube containing `x` (upper faces go to the lower cube).
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut j = 0;
        for &xi in x {
            let i = ((xi * self.m as f64).floor().max(0.0) as usize).min(self.m - 1);
            j = j * self.m + i;
        }
        j + 1
    }
}

/// Parameters of a lower-bound prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub case: PriorCase,
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub q: u32,
    pub d: usize,
    /// Mixing imbalance, used by Case I only.
    pub eps: f64,
}

impl PriorSpec {
    pub fn new(case: PriorCase, n: usize, s: f64, p: f64, q: u32, d: usize, eps: f64) -> Result<Self> {
        let spec = Self { case, n, s, p, q, d, eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.q == 0 {
            return Err(Error::InvalidParameter("n, d and q must be positive".into()));
        }
        if !(self.s >= 0.0) || !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("need s >= 0 and p > 1, got s={} p={}", self.s, self.p)));
        }
        if self.case == PriorCase::CaseI && !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        Ok(())
    }

    /// Smallest `m` with `m^d >= 200 n`.
    pub fn m(&self) -> usize {
        let target = 200 * self.n;
        let mut m = (target as f64).powf(1.0 / self.d as f64).floor().max(1.0) as usize;
        while m.pow(self.d as u32) < target {
            m += 1;
        }
        while m > 1 && (m - 1).pow(self.d as u32) >= target {
            m -= 1;
        }
        m
    }

    pub fn grid(&self) -> CubeGrid {
        CubeGrid { m: self.m(), dim: self.d }
    }

    pub fn cube_count(&self) -> usize {
        self.grid().count()
    }

    /// `‖K‖_∞ = e^{-d}`.
    pub fn alpha(&self) -> f64 {
        (-(self.d as f64)).exp()
    }

    /// Case II offset `3α`.
    pub fn offset(&self) -> f64 {
        3.0 * self.alpha()
    }

    pub fn kappa(&self) -> f64 {
        (2.0 / (3.0 * self.n as f64)).sqrt() / 3.0
    }

    pub fn lambda(&self) -> f64 {
        0.5
    }

    /// Bump amplitude for this case.
    pub fn amplitude(&self) -> f64 {
        let m = self.m() as f64;
        match self.case {
            PriorCase::CaseI => m.powf(-self.s + self.d as f64 / self.p),
            PriorCase::CaseII => m.powf(-self.s),
        }
    }

    /// Probability that a Case II sign is `-1` under `arm`.
    pub fn minus_probability(&self, arm: usize) -> f64 {
        let k = self.kappa();
        if arm == 0 {
            (1.0 + k) / 2.0
        } else {
            (1.0 - k) / 2.0
        }
    }

    /// Probability of drawing the nonzero Case I function under `arm`.
    pub fn bump_probability(&self, arm: usize) -> f64 {
        if arm == 0 {
            (1.0 - self.eps) / 2.0
        } else {
            (1.0 + self.eps) / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Base(BumpVariant),
    Cube { grid: CubeGrid, index: usize, amplitude: f64, lo: Vec<f64>, hi: Vec<f64>, center: Vec<f64> },
    Prior { grid: CubeGrid, offset: f64, amplitude: f64, signs: Vec<i8>, case: PriorCase, arm: Option<usize> },
    Peak { beta: f64, center: Vec<f64> },
    Smooth(SmoothKind),
    Constant(f64),
}

/// An evaluable function on `[0,1]^d` with smoothness metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    shape: Shape,
    dim: usize,
    smoothness: f64,
    integrability: f64,
}

/// `K0(x)`, with value 0 once any `|x_i| >= 1`.
pub fn bump_k0(x: &[f64]) -> f64 {
    let mut expo = 0.0;
    for &xi in x {
        let t = 1.0 - xi * xi;
        if t <= 0.0 {
            return 0.0;
        }
        expo -= 1.0 / t;
    }
    expo.exp()
}

/// `K(x) = K0(2x)`.
pub fn bump_k(x: &[f64]) -> f64 {
    let mut expo = 0.0;
    for &xi in x {
        let t = 1.0 - 4.0 * xi * xi;
        if t <= 0.0 {
            return 0.0;
        }
        expo -= 1.0 / t;
    }
    expo.exp()
}

pub fn bump_base_eval(x: &[f64], variant: BumpVariant) -> f64 {
    match variant {
        BumpVariant::K0 => bump_k0(x),
        BumpVariant::K => bump_k(x),
    }
}

fn local_bump(grid: &CubeGrid, center: &[f64], x: &[f64]) -> f64 {
    let m = grid.m as f64;
    let mut expo = 0.0;
    for (&xi, &ci) in x.iter().zip(center) {
        let u = 2.0 * m * (xi - ci);
        let t = 1.0 - u * u;
        if t <= 0.0 {
            return 0.0;
        }
        expo -= 1.0 / t;
    }
    expo.exp()
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// A bump `amplitude * K(m(x - c_j))` on cube `j` of the `m^d` grid.
pub fn make_scaled_bump(m: usize, j: usize, s: f64, p: f64, d: usize, amplitude: AmplitudeExponent) -> Result<TestFunction> {
    check_dim(d)?;
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let grid = CubeGrid { m, dim: d };
    let center = grid.center(j)?;
    let (lo, hi) = grid.bounds(j)?;
    let mf = m as f64;
    let amp = match amplitude {
        AmplitudeExponent::LowerBoundCaseI => mf.powf(-s + d as f64 / p),
        AmplitudeExponent::LowerBoundCaseII => mf.powf(-s),
    };
    Ok(TestFunction { shape: Shape::Cube { grid, index: j, amplitude: amp, lo, hi, center }, dim: d, smoothness: s, integrability: p })
}

/// Draws one function from the prior of `spec` under hypothesis `arm` (0 or 1).
pub fn make_prior_sample(spec: &PriorSpec, arm: usize, rng: &mut RngStream) -> Result<TestFunction> {
    spec.validate()?;
    if arm > 1 {
        return Err(Error::InvalidParameter(format!("arm must be 0 or 1, got {arm}")));
    }
    let mut f = match spec.case {
        PriorCase::CaseI => prior_case1(spec, rng.uniform() < spec.bump_probability(arm))?,
        PriorCase::CaseII => {
            let pm = spec.minus_probability(arm);
            let signs = (0..spec.cube_count()).map(|_| if rng.uniform() < pm { -1 } else { 1 }).collect();
            prior_case2(spec, signs)?
        }
    };
    if let Shape::Prior { arm: a, .. } = &mut f.shape {
        *a = Some(arm);
    }
    Ok(f)
}

/// Case I function with the bump switched on or off.
pub fn prior_case1(spec: &PriorSpec, with_bump: bool) -> Result<TestFunction> {
    spec.validate()?;
    let grid = spec.grid();
    let mut signs = vec![0i8; grid.count()];
    if with_bump {
        signs[0] = 1;
    }
    Ok(TestFunction {
        shape: Shape::Prior { grid, offset: 0.0, amplitude: spec.amplitude(), signs, case: PriorCase::CaseI, arm: None },
        dim: spec.d,
        smoothness: spec.s,
        integrability: spec.p,
    })
}

/// Case II function `M + sum_j eta_j f_j` with explicit signs.
pub fn prior_case2(spec: &PriorSpec, signs: Vec<i8>) -> Result<TestFunction> {
    spec.validate()?;
    let grid = spec.grid();
    if signs.len() != grid.count() {
        return Err(Error::InvalidParameter(format!("expected {} signs, got {}", grid.count(), signs.len())));
    }
    if signs.iter().any(|&e| e != 1 && e != -1) {
        return Err(Error::InvalidParameter("Case II signs must be +1 or -1".into()));
    }
    Ok(TestFunction {
        shape: Shape::Prior { grid, offset: spec.offset(), amplitude: spec.amplitude(), signs, case: PriorCase::CaseII, arm: None },
        dim: spec.d,
        smoothness: spec.s,
        integrability: spec.p,
    })
}

/// Admissible peak exponents `[d/(2q), min(d/q, d/p - s))`.
pub fn peak_window(d: usize, q: u32, p: f64, s: f64) -> (f64, f64) {
    let d = d as f64;
    let q = q as f64;
    (d / (2.0 * q), (d / q).min(d / p - s))
}

/// The peak `‖x - x0‖^{-beta}`.
pub fn make_peak(beta: f64, x0: &[f64], q: u32, p: f64, s: f64) -> Result<TestFunction> {
    let d = x0.len();
    check_dim(d)?;
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    if x0.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::OutsideDomain(x0.to_vec()));
    }
    let df = d as f64;
    let qf = q as f64;
    let (lo, hi) = peak_window(d, q, p, s);
    if !(lo < hi) {
        return Err(Error::PeakOutsideWindow(format!(
            "empty window: need d/(2q) = {lo} < min(d/q, d/p - s) = {hi}, i.e. s < d(2q-p)/(2pq) = {}",
            df * (2.0 * qf - p) / (2.0 * p * qf)
        )));
    }
    if beta < lo {
        return Err(Error::PeakOutsideWindow(format!("beta = {beta} < d/(2q) = {lo}: the peak would have finite 2q-th moment")));
    }
    if beta >= df / qf {
        return Err(Error::PeakOutsideWindow(format!("beta = {beta} >= d/q = {}: the q-th moment is infinite", df / qf)));
    }
    if beta >= df / p - s {
        return Err(Error::PeakOutsideWindow(format!(
            "beta = {beta} >= d/p - s = {}: the peak is not in the stated smoothness class",
            df / p - s
        )));
    }
    Ok(TestFunction { shape: Shape::Peak { beta, center: x0.to_vec() }, dim: d, smoothness: s, integrability: p })
}

impl TestFunction {
    pub fn bump_base(variant: BumpVariant, d: usize) -> Self {
        Self { shape: Shape::Base(variant), dim: d.max(1), smoothness: 1.0, integrability: f64::INFINITY }
    }

    pub fn constant(c: f64, d: usize) -> Self {
        Self { shape: Shape::Constant(c), dim: d.max(1), smoothness: 1.0, integrability: f64::INFINITY }
    }

    pub fn smooth(kind: SmoothKind, d: usize) -> Self {
        Self { shape: Shape::Smooth(kind), dim: d.max(1), smoothness: 1.0, integrability: f64::INFINITY }
    }

    pub fn sine_plus_two(d: usize) -> Self {
        Self::smooth(SmoothKind::SinePlusTwo, d)
    }

    pub fn one_plus_bump(d: usize) -> Self {
        Self::smooth(SmoothKind::OnePlusBump, d)
    }

    pub fn linear(d: usize) -> Self {
        Self::smooth(SmoothKind::Linear, d)
    }

    /// See [`make_peak`].
    pub fn peak(beta: f64, x0: &[f64], q: u32, p: f64, s: f64) -> Result<Self> {
        make_peak(beta, x0, q, p, s)
    }

    /// Overrides the smoothness metadata (`s`, `p`) carried by the function.
    pub fn with_regularity(mut self, s: f64, p: f64) -> Self {
        self.smoothness = s;
        self.integrability = p;
        self
    }

    pub fn kind(&self) -> FunctionKind {
        match self.shape {
            Shape::Base(_) => FunctionKind::BumpBase,
            Shape::Cube { .. } => FunctionKind::ScaledBump,
            Shape::Prior { .. } => FunctionKind::PriorSample,
            Shape::Peak { .. } => FunctionKind::Peak,
            Shape::Smooth(_) => FunctionKind::Smooth,
            Shape::Constant(_) => FunctionKind::Constant,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn integrability(&self) -> f64 {
        self.integrability
    }

    /// Signs of a prior sample (`0` marks an absent bump).
    pub fn signs(&self) -> Option<&[i8]> {
        match &self.shape {
            Shape::Prior { signs, .. } => Some(signs),
            _ => None,
        }
    }

    /// Peak exponent and location.
    pub fn peak_params(&self) -> Option<(f64, &[f64])> {
        match &self.shape {
            Shape::Peak { beta, center } => Some((*beta, center)),
            _ => None,
        }
    }

    /// Cube grid, index and amplitude of a scaled bump.
    pub fn cube_params(&self) -> Option<(CubeGrid, usize, f64)> {
        match &self.shape {
            Shape::Cube { grid, index, amplitude, .. } => Some((*grid, *index, *amplitude)),
            _ => None,
        }
    }

    /// Short identifier recorded with observations.
    pub fn id(&self) -> String {
        match &self.shape {
            Shape::Base(v) => format!("bump_base({v:?},d={})", self.dim),
            Shape::Cube { grid, index, amplitude, .. } => {
                format!("scaled_bump(m={},j={index},amp={amplitude:e},d={})", grid.m, self.dim)
            }
            Shape::Prior { grid, case, arm, .. } => {
                let arm = arm.map_or("forced".to_string(), |a| a.to_string());
                format!("prior({case:?},m={},arm={arm},d={})", grid.m, self.dim)
            }
            Shape::Peak { beta, center } => format!("peak(beta={beta},x0={center:?})"),
            Shape::Smooth(k) => format!("{k:?}(d={})", self.dim),
            Shape::Constant(c) => format!("constant({c},d={})", self.dim),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Base(v) => bump_base_eval(x, *v),
            Shape::Cube { grid, amplitude, lo, hi, center, .. } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(&xi, (&l, &h))| xi >= l && xi <= h);
                if inside {
                    amplitude * local_bump(grid, center, x)
                } else {
                    0.0
                }
            }
            Shape::Prior { grid, offset, amplitude, signs, .. } => {
                let j = grid.locate(x);
                let sign = signs[j - 1];
                if sign == 0 {
                    return *offset;
                }
                let center: Vec<f64> = grid.center(j).expect("located cube is valid");
                offset + sign as f64 * amplitude * local_bump(grid, &center, x)
            }
            Shape::Peak { beta, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2.sqrt().powf(-beta)
            }
            Shape::Smooth(SmoothKind::SinePlusTwo) => 2.0 + x.iter().map(|&t| (2.0 * PI * t).sin()).product::<f64>(),
            Shape::Smooth(SmoothKind::OnePlusBump) => {
                let shifted: Vec<f64> = x.iter().map(|t| t - 0.5).collect();
                1.0 + bump_k(&shifted)
            }
            Shape::Smooth(SmoothKind::Linear) => x.iter().sum(),
            Shape::Constant(c) => *c,
        }
    }

    /// Upper bound on `|f|`, infinite for peaks.
    pub fn sup_norm(&self) -> f64 {
        let d = self.dim as f64;
        match &self.shape {
            Shape::Base(_) => (-d).exp(),
            Shape::Cube { amplitude, .. } => amplitude * (-d).exp(),
            Shape::Prior { offset, amplitude, .. } => offset + amplitude * (-d).exp(),
            Shape::Peak { .. } => f64::INFINITY,
            Shape::Smooth(SmoothKind::SinePlusTwo) => 3.0,
            Shape::Smooth(SmoothKind::OnePlusBump) => 1.0 + (-d).exp(),
            Shape::Smooth(SmoothKind::Linear) => d,
            Shape::Constant(c) => c.abs(),
        }
    }
}

impl Predictor for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

fn power(v: f64, q: u32) -> f64 {
    v.powi(q as i32)
}

fn unit_box(d: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; d], vec![1.0; d])
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    // Gamma(d/2) by recursion from Gamma(1/2) or Gamma(1).
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut a = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a < d as f64 / 2.0 {
        gamma *= a;
        a += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

/// Breakpoints on `axis` at the center and at the crossings of the sphere of
/// radius `r` around `center`, given the fixed leading coordinates.
fn sphere_breaks(center: &[f64], radii: &[f64], axis: usize, prefix: &[f64]) -> Vec<f64> {
    let done: f64 = prefix.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    let mut out = vec![center[axis]];
    for &r in radii {
        let rest = r * r - done;
        if rest > 0.0 {
            let h = rest.sqrt();
            out.push(center[axis] - h);
            out.push(center[axis] + h);
        }
    }
    out
}

/// Closed-form `∫_0^1 |x - x0|^{-a} dx` split into sides, with values above
/// `cap` clamped (`cap = inf` for no clamping).
fn peak_1d(x0: f64, beta: f64, q: u32, cap: f64) -> f64 {
    let a = beta * q as f64;
    let rho = if cap.is_finite() { cap.powf(-1.0 / beta) } else { 0.0 };
    let side = |len: f64| {
        if len <= 0.0 {
            0.0
        } else if len <= rho {
            power(cap, q) * len
        } else {
            let inner = if rho > 0.0 { power(cap, q) * rho - rho.powf(1.0 - a) / (1.0 - a) } else { 0.0 };
            inner + len.powf(1.0 - a) / (1.0 - a)
        }
    };
    side(x0) + side(1.0 - x0)
}

/// Ground truth `∫_{[0,1]^d} f^q` to absolute tolerance `tol`.
pub fn reference_moment(f: &TestFunction, q: u32, tol: f64) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let d = f.dim;
    match &f.shape {
        Shape::Constant(c) => Ok(power(*c, q)),
        Shape::Peak { beta, center } if d == 1 => Ok(peak_1d(center[0], *beta, q, f64::INFINITY)),
        Shape::Peak { beta, center } => peak_moment(center, *beta, q, tol),
        Shape::Smooth(SmoothKind::Linear) if d == 1 => Ok(1.0 / (q as f64 + 1.0)),
        Shape::Smooth(SmoothKind::SinePlusTwo) if q == 1 => Ok(2.0),
        Shape::Cube { lo, hi, .. } => {
            integrate_box(&|x: &[f64]| power(f.eval(x), q), lo, hi, tol, &|a, _: &[f64]| vec![0.5 * (lo[a] + hi[a])])
        }
        Shape::Prior { grid, offset, amplitude, signs, .. } => {
            let mut counts = [0usize; 3];
            for &e in signs {
                counts[(e + 1) as usize] += 1;
            }
            let mut total = 0.0;
            for (slot, &count) in counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let sign = slot as f64 - 1.0;
                let per = cube_moment(*grid, *offset, sign * amplitude, q, tol / (3.0 * count as f64))?;
                total += count as f64 * per;
            }
            Ok(total)
        }
        Shape::Smooth(SmoothKind::OnePlusBump) | Shape::Base(BumpVariant::K) => {
            let (lo, hi) = unit_box(d);
            integrate_box(&|x: &[f64]| power(f.eval(x), q), &lo, &hi, tol, &|_, _: &[f64]| vec![0.5])
        }
        _ => {
            let (lo, hi) = unit_box(d);
            integrate_box(&|x: &[f64]| power(f.eval(x), q), &lo, &hi, tol, &|_, _: &[f64]| vec![0.25, 0.5, 0.75])
        }
    }
}

/// `∫_{Ω_1} (offset + amplitude K(m(x - c_1)))^q`, identical for every cube.
pub fn cube_moment(grid: CubeGrid, offset: f64, amplitude: f64, q: u32, tol: f64) -> Result<f64> {
    let center = grid.center(1)?;
    let (lo, hi) = grid.bounds(1)?;
    let g = |x: &[f64]| power(offset + amplitude * local_bump(&grid, &center, x), q);
    integrate_box(&g, &lo, &hi, tol, &|a, _: &[f64]| vec![center[a]])
}

fn interior_radius(center: &[f64]) -> f64 {
    center.iter().map(|&c| c.min(1.0 - c)).fold(f64::INFINITY, f64::min)
}

fn peak_moment(center: &[f64], beta: f64, q: u32, tol: f64) -> Result<f64> {
    let d = center.len();
    let a = beta * q as f64;
    let gap = interior_radius(center);
    if !(gap > 0.0) {
        return Err(Error::Unsupported("peak moments in d >= 2 need an interior peak location".into()));
    }
    let r = 0.5 * gap;
    let ball = sphere_area(d) * r.powf(d as f64 - a) / (d as f64 - a);
    let r2 = r * r;
    let outside = |x: &[f64]| {
        let dist2: f64 = x.iter().zip(center).map(|(u, v)| (u - v) * (u - v)).sum();
        if dist2 < r2 {
            0.0
        } else {
            dist2.powf(-0.5 * a)
        }
    };
    let (lo, hi) = unit_box(d);
    let rest = integrate_box(&outside, &lo, &hi, tol, &|axis, prefix: &[f64]| sphere_breaks(center, &[r], axis, prefix))?;
    Ok(ball + rest)
}

/// Ground truth `∫ clamp(f, -cap, cap)^q` for the truncated target.
pub fn reference_truncated_moment(f: &TestFunction, q: u32, cap: f64, tol: f64) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive, got {cap}")));
    }
    match &f.shape {
        Shape::Peak { beta, center } if f.dim == 1 => Ok(peak_1d(center[0], *beta, q, cap)),
        Shape::Peak { beta, center } => {
            let rho = cap.powf(-1.0 / beta);
            let (lo, hi) = unit_box(f.dim);
            integrate_box(&|x: &[f64]| power(f.eval(x).clamp(-cap, cap), q), &lo, &hi, tol, &|axis, prefix: &[f64]| {
                sphere_breaks(center, &[rho], axis, prefix)
            })
        }
        Shape::Constant(c) => Ok(power(c.clamp(-cap, cap), q)),
        _ if f.sup_norm() <= cap => reference_moment(f, q, tol),
        _ => {
            let (lo, hi) = unit_box(f.dim);
            integrate_box(&|x: &[f64]| power(f.eval(x).clamp(-cap, cap), q), &lo, &hi, tol, &|_, _: &[f64]| vec![0.25, 0.5, 0.75])
        }
    }
}

/// `‖K‖_{L^q}^q` in dimension `d` by adaptive quadrature of the 1-D profile.
pub fn bump_power_integral_numeric(q: u32, d: usize, tol: f64) -> Result<f64> {
    let one = integrate(|x| power(bump_k(&[x]), q), -0.5, 0.5, &[0.0], tol, DEFAULT_BUDGET)?;
    Ok(one.powi(d as i32))
}

/// `‖K‖_{L^q}^q`, pinned when available.
pub fn bump_power_integral(q: u32, d: usize) -> Result<f64> {
    match constants::bump_power_integral(q, d) {
        Some(v) => Ok(v),
        None => bump_power_integral_numeric(q, d, 1e-14),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_bump_values() {
        assert!((bump_base_eval(&[0.0], BumpVariant::K0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(bump_base_eval(&[1.0], BumpVariant::K0), 0.0);
        assert_eq!(bump_base_eval(&[0.5], BumpVariant::K), 0.0);
        assert!((bump_base_eval(&[0.25], BumpVariant::K) - 0.263_597_138_115_726_77).abs() < 1e-15);
    }

    #[test]
    fn base_bump_bounded_by_e_minus_d() {
        for d in 1..=3 {
            let x = vec![0.0; d];
            assert!((bump_k(&x) - (-(d as f64)).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cube_bump_is_centered() {
        let f = make_scaled_bump(1, 1, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseII).unwrap();
        assert!((f.eval(&[0.5]) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn scaled_bump_support() {
        let f = make_scaled_bump(4, 2, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseII).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            if !(0.25..=0.5).contains(&x) {
                assert_eq!(f.eval(&[x]), 0.0, "x = {x}");
            }
        }
        assert!(f.eval(&[0.375]) > 0.0);
    }

    #[test]
    fn cube_index_validation() {
        let err = make_scaled_bump(4, 5, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseII).unwrap_err();
        assert!(matches!(err, Error::InvalidCubeIndex { index: 5, count: 4 }));
        assert!(make_scaled_bump(4, 0, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseII).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = CubeGrid { m: 3, dim: 2 };
        assert_eq!(g.axes(2).unwrap(), vec![0, 1]);
        assert_eq!(g.center(4).unwrap(), vec![0.5, 1.0 / 6.0]);
        assert_eq!(g.locate(&[0.5, 0.1]), 4);
        assert_eq!(g.locate(&[1.0, 1.0]), 9);
    }

    #[test]
    fn peak_values() {
        let case2 = make_scaled_bump(8, 3, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseII).unwrap();
        let (_, _, amp) = case2.cube_params().unwrap();
        assert!((amp - 0.125).abs() < 1e-15);
        let case1 = make_scaled_bump(8, 3, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseI).unwrap();
        assert!((case1.sup_norm() - 8f64.powf(-0.75) * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn case1_moment_matches_scaling_law() {
        // I = m^{-q(s - d/p) - d} ‖K‖_q^q for m=4, s=1, p=4, q=2, d=1
        let f = make_scaled_bump(4, 1, 1.0, 4.0, 1, AmplitudeExponent::LowerBoundCaseI).unwrap();
        let got = reference_moment(&f, 2, 1e-14).unwrap();
        let want = 4f64.powf(-2.5) * bump_power_integral(2, 1).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn peak_window_rules() {
        let f = make_peak(0.18, &[0.0], 3, 4.0, 0.05).unwrap();
        assert_eq!(f.kind(), FunctionKind::Peak);
        let (lo, hi) = peak_window(1, 3, 4.0, 0.05);
        assert!((lo - 1.0 / 6.0).abs() < 1e-15 && (hi - 0.2).abs() < 1e-15);
        assert!(matches!(make_peak(0.5, &[0.0], 3, 4.0, 0.05), Err(Error::PeakOutsideWindow(_))));
        assert!(matches!(make_peak(0.1, &[0.0], 3, 4.0, 0.05), Err(Error::PeakOutsideWindow(_))));
        // empty window: s above the rare-event threshold
        let err = make_peak(0.2, &[0.0], 3, 4.0, 0.2).unwrap_err();
        assert!(err.to_string().contains("s < d(2q-p)/(2pq)"));
    }

    #[test]
    fn peak_moment_closed_form() {
        let f = make_peak(0.18, &[0.0], 3, 4.0, 0.05).unwrap();
        assert!((reference_moment(&f, 3, 1e-12).unwrap() - 1.0 / 0.46).abs() < 1e-12);
        assert_eq!(f.eval(&[0.0]), f64::INFINITY);
    }

    #[test]
    fn peak_moment_off_center_matches_quadrature() {
        let f = make_peak(0.18, &[0.3], 3, 4.0, 0.05).unwrap();
        let exact = reference_moment(&f, 3, 1e-12).unwrap();
        // distance from the peak as the integration variable on each side
        let side = |len: f64| integrate(|t: f64| t.powf(-0.54), 0.0, len, &[], 1e-11, DEFAULT_BUDGET).unwrap();
        let num = side(0.3) + side(0.7);
        assert!((exact - num).abs() < 1e-8);
    }

    #[test]
    fn peak_moment_two_dim() {
        // beta in [1/3, min(2/3, 1/2 - 0.05)) for d=2, q=3, p=4, s=0.05
        let f = make_peak(0.4, &[0.5, 0.5], 3, 4.0, 0.05).unwrap();
        let got = reference_moment(&f, 3, 1e-7).unwrap();
        // polar integral over the inscribed disk plus the corner remainder
        let a = 1.2;
        let disk = 2.0 * PI * 0.5f64.powf(2.0 - a) / (2.0 - a);
        let corners = integrate_box(
            &|x: &[f64]| {
                let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
                if r2 < 0.25 {
                    0.0
                } else {
                    r2.powf(-a / 2.0)
                }
            },
            &[0.0, 0.0],
            &[1.0, 1.0],
            1e-8,
            &|axis, prefix: &[f64]| sphere_breaks(&[0.5, 0.5], &[0.5], axis, prefix),
        )
        .unwrap();
        assert!((got - (disk + corners)).abs() < 1e-6, "{got} vs {}", disk + corners);
    }

    #[test]
    fn truncated_peak_reference() {
        let f = make_peak(0.18, &[0.0], 3, 4.0, 0.05).unwrap();
        let cap = 4096f64.powf(0.18);
        let got = reference_truncated_moment(&f, 3, cap, 1e-12).unwrap();
        let rho = cap.powf(-1.0 / 0.18);
        let num = integrate(|x: f64| x.powf(-0.18).min(cap).powi(3), 0.0, 1.0, &[rho], 1e-12, DEFAULT_BUDGET).unwrap();
        assert!((got - num).abs() < 1e-9, "{got} vs {num}");
        assert!(got < 1.0 / 0.46);
    }

    #[test]
    fn constant_moment_exact() {
        assert_eq!(reference_moment(&TestFunction::constant(1.5, 2), 3, 1e-12).unwrap(), 3.375);
    }

    #[test]
    fn smooth_moments() {
        let f = TestFunction::sine_plus_two(1);
        let q2 = reference_moment(&f, 2, 1e-12).unwrap();
        assert!((q2 - 4.5).abs() < 1e-11);
        let g = TestFunction::linear(1);
        assert!((reference_moment(&g, 2, 1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn one_plus_bump_moment() {
        let f = TestFunction::one_plus_bump(1);
        let got = reference_moment(&f, 1, 1e-12).unwrap();
        assert!((got - 1.0 - bump_power_integral(1, 1).unwrap()).abs() < 1e-11);
    }

    fn case2_spec(n: usize) -> PriorSpec {
        PriorSpec::new(PriorCase::CaseII, n, 1.0, 4.0, 3, 1, 0.5).unwrap()
    }

    #[test]
    fn prior_spec_derived_quantities() {
        let spec = case2_spec(64);
        assert_eq!(spec.m(), 12_800);
        assert!(spec.kappa() > 0.0 && spec.kappa() < 1.0);
        let two = PriorSpec::new(PriorCase::CaseII, 64, 1.0, 4.0, 3, 2, 0.5).unwrap();
        assert_eq!(two.m(), 114);
        assert!(two.cube_count() >= 200 * 64);
    }

    #[test]
    fn case2_all_plus_stays_positive() {
        let spec = PriorSpec::new(PriorCase::CaseII, 2, 1.0, 4.0, 3, 1, 0.5).unwrap();
        let f = prior_case2(&spec, vec![1; spec.cube_count()]).unwrap();
        let lower = spec.offset() - spec.alpha();
        for i in 0..=4000 {
            assert!(f.eval(&[i as f64 / 4000.0]) >= lower);
        }
    }

    #[test]
    fn case1_zero_arm() {
        let spec = PriorSpec::new(PriorCase::CaseI, 4, 1.0, 4.0, 3, 1, 0.5).unwrap();
        let f = prior_case1(&spec, false).unwrap();
        assert_eq!(f.eval(&[0.0001]), 0.0);
        assert_eq!(reference_moment(&f, 3, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn prior_sample_records_signs() {
        let spec = case2_spec(2);
        let a = make_prior_sample(&spec, 0, &mut RngStream::new(9, 0)).unwrap();
        let b = make_prior_sample(&spec, 0, &mut RngStream::new(9, 0)).unwrap();
        assert_eq!(a.signs(), b.signs());
        assert_eq!(a.signs().unwrap().len(), 400);
    }

    #[test]
    fn prior_moment_matches_cube_sum() {
        let spec = PriorSpec::new(PriorCase::CaseII, 4, 1.0, 4.0, 3, 1, 0.5).unwrap();
        let f = make_prior_sample(&spec, 1, &mut RngStream::new(3, 0)).unwrap();
        let grid = spec.grid();
        let mut sum = 0.0;
        for j in 1..=grid.count() {
            let (lo, hi) = grid.bounds(j).unwrap();
            sum += integrate(|x| f.eval(&[x]).powi(3), lo[0], hi[0], &[0.5 * (lo[0] + hi[0])], 1e-14, 200).unwrap();
        }
        let got = reference_moment(&f, 3, 1e-10).unwrap();
        assert!((got - sum).abs() < 1e-8, "{got} vs {sum}");
    }

    #[test]
    fn refinement_monotone() {
        let f = TestFunction::one_plus_bump(1);
        let coarse = reference_moment(&f, 3, 1e-6).unwrap();
        let fine = reference_moment(&f, 3, 5e-7).unwrap();
        assert!((coarse - fine).abs() <= 1e-6);
    }
}
