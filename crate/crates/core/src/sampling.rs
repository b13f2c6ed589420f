//! Uniform quadrature points, the Gaussian observation-noise model, half
//! splits, and counter-based reproducible random streams.
//!
//! Every random quantity in the toolkit is drawn from an [`RngStream`], a
//! ChaCha8 generator keyed by `base_seed` and positioned on an independent
//! 64-bit stream. A stream is identified by the pair `(base_seed,
//! stream_index)`; equal pairs replay bit-identical sequences, so work can be
//! fanned out across threads without changing results.

use log::warn;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfn::TestFunction;

pub const RNG_ALGORITHM: &str = "chacha8";

/// A seeded, positioned random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    base_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_index);
        Self { base_seed, stream_index, rng }
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn provenance(&self) -> SeedProvenance {
        SeedProvenance { base_seed: self.base_seed, stream_index: self.stream_index }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Maps `(base_seed, rep_index)` to its own stream. Injective by construction.
pub fn derive_substream(base_seed: u64, rep_index: u64) -> RngStream {
    RngStream::new(base_seed, rep_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub base_seed: u64,
    pub stream_index: u64,
}

/// Points in `[0,1]^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, coords: Vec::new() }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!("{} coordinates cannot be split into points of dimension {dim}", coords.len())));
        }
        Ok(Self { dim, coords })
    }

    /// One-dimensional points from a list of scalars.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Self { dim: 1, coords: xs.to_vec() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut set = Self::new(dim);
        for r in rows {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.len() });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self { dim: self.dim, coords: self.coords[range.start * self.dim..range.end * self.dim].to_vec() }
    }

    fn set(&mut self, i: usize, p: &[f64]) {
        self.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(p);
    }
}

/// Quadrature points with their observed values and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: PointSet,
    pub values: Vec<f64>,
    /// Noise exponent; `f64::INFINITY` means exact observations.
    pub gamma: f64,
    /// The budget `n` entering the noise scale `n^{-gamma}`.
    pub noise_n: usize,
    pub source: String,
    pub seed: Option<SeedProvenance>,
}

impl SampleSet {
    /// Builds a sample set directly from points and values (no noise metadata).
    pub fn from_parts(points: PointSet, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidParameter(format!("{} points but {} values", points.len(), values.len())));
        }
        let n = values.len();
        Ok(Self { points, values, gamma: f64::INFINITY, noise_n: n, source: "manual".into(), seed: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    fn sub(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            points: self.points.slice(range.clone()),
            values: self.values[range].to_vec(),
            gamma: self.gamma,
            noise_n: self.noise_n,
            source: self.source.clone(),
            seed: self.seed,
        }
    }
}

/// `n` i.i.d. uniform points on `[0,1]^d`.
pub fn sample_uniform(n: usize, d: usize, rng: &mut RngStream) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let coords = (0..n * d).map(|_| rng.uniform()).collect();
    Ok(PointSet { dim: d, coords })
}

/// Noise standard deviation `n_total^{-gamma}` (zero for `gamma = inf`).
pub fn noise_sigma(n_total: usize, gamma: f64) -> f64 {
    if gamma.is_infinite() {
        0.0
    } else {
        (n_total as f64).powf(-gamma)
    }
}

/// Observes `f` at `points` with additive Gaussian noise of scale `n_total^{-gamma}`.
///
/// A point where `f` is not finite (a peak's singular point) is redrawn from
/// the same stream.
pub fn observe(f: &TestFunction, mut points: PointSet, gamma: f64, n_total: usize, rng: &mut RngStream) -> Result<SampleSet> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise exponent must be in [0, inf], got {gamma}")));
    }
    if points.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: points.dim() });
    }
    let sigma = noise_sigma(n_total.max(1), gamma);
    let mut values = Vec::with_capacity(points.len());
    let mut fresh = vec![0.0; points.dim()];
    for i in 0..points.len() {
        let mut fx = f.eval(points.get(i));
        while !fx.is_finite() {
            warn!("observation at {:?} hit a singular point; resampling", points.get(i));
            for c in fresh.iter_mut() {
                *c = rng.uniform();
            }
            points.set(i, &fresh);
            fx = f.eval(points.get(i));
        }
        let y = if sigma == 0.0 { fx } else { fx + sigma * rng.standard_normal() };
        values.push(y);
    }
    Ok(SampleSet { points, values, gamma, noise_n: n_total, source: f.id(), seed: Some(rng.provenance()) })
}

/// Splits into the first and second halves. An odd trailing point is dropped.
pub fn split_halves(s: &SampleSet) -> Result<(SampleSet, SampleSet)> {
    let n = s.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if n % 2 == 1 {
        warn!("odd sample size {n}: dropping the last point before splitting");
    }
    let half = n / 2;
    Ok((s.sub(0..half), s.sub(half..2 * half)))
}
