//! k-nearest-neighbour regression and its quadrature cells.
//!
//! Neighbours are ranked by Euclidean distance with ties going to the lower
//! training index. In one dimension the k-NN set of any query is a run of
//! `k` consecutive points in sorted order, so prediction is a binary search
//! over the run boundaries and the fitted function is piecewise constant with
//! exactly computable moments and cell volumes. In higher dimensions a
//! uniform bucket grid is searched ring by ring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::tensor_midpoint;
use crate::sampling::{PointSet, RngStream, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeMethod {
    ExactOrderStatistics,
    ProbeMonteCarlo,
}

/// Volumes `V(D_i)` of the regions whose k-NN sets contain each training point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVolumes {
    /// Indexed like the training set.
    pub volumes: Vec<f64>,
    pub method: VolumeMethod,
    pub probe_n: Option<usize>,
    /// Per-point standard errors (zero when exact).
    pub std_errors: Vec<f64>,
}

impl CellVolumes {
    pub fn total(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

#[derive(Debug, Clone)]
enum Index {
    Line {
        /// Training indices in ascending coordinate order.
        order: Vec<usize>,
        ys: Vec<f64>,
        /// Boundary between run `a` and run `a + 1`.
        bounds: Vec<f64>,
        distinct: bool,
    },
    Buckets {
        per_axis: usize,
        starts: Vec<usize>,
        items: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    points: PointSet,
    values: Vec<f64>,
    index: Index,
}

/// Default per-axis midpoint resolution for `∫ f̂^q`: `max(ceil(1024^{1/d}), 4k)`.
pub fn default_resolution(d: usize, k: usize) -> usize {
    let base = (1024f64.powf(1.0 / d as f64) - 1e-9).ceil() as usize;
    base.max(4 * k)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn bucket_of(x: &[f64], per_axis: usize) -> Vec<usize> {
    x.iter().map(|&c| ((c * per_axis as f64).floor().max(0.0) as usize).min(per_axis - 1)).collect()
}

/// Advances `axes` through the box `lo..=hi` in row-major order.
fn next_cell(axes: &mut [usize], lo: &[usize], hi: &[usize]) -> bool {
    for a in (0..axes.len()).rev() {
        if axes[a] < hi[a] {
            axes[a] += 1;
            axes[a + 1..].copy_from_slice(&lo[a + 1..]);
            return true;
        }
    }
    false
}

fn flat(axes: &[usize], per_axis: usize) -> usize {
    axes.iter().fold(0, |j, &i| j * per_axis + i)
}

impl KnnRegressor {
    pub fn fit(s1: &SampleSet, k: usize) -> Result<Self> {
        let m = s1.len();
        if m == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if k == 0 || k > m {
            return Err(Error::KOutOfRange { k, max: m });
        }
        let dim = s1.dim();
        let index = if dim == 1 {
            let xs_raw = s1.points.flat();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| xs_raw[a].total_cmp(&xs_raw[b]).then(a.cmp(&b)));
            let xs: Vec<f64> = order.iter().map(|&i| xs_raw[i]).collect();
            let ys: Vec<f64> = order.iter().map(|&i| s1.values[i]).collect();
            let distinct = xs.windows(2).all(|w| w[0] < w[1]);
            let bounds = (0..m - k).map(|a| 0.5 * (xs[a] + xs[a + k])).collect();
            Index::Line { order, ys, bounds, distinct }
        } else {
            let per_axis = ((m as f64 / 2.0).powf(1.0 / dim as f64).floor() as usize).max(1);
            let total = per_axis.pow(dim as u32);
            let mut counts = vec![0usize; total + 1];
            let cells: Vec<usize> = s1.points.iter().map(|p| flat(&bucket_of(p, per_axis), per_axis)).collect();
            for &c in &cells {
                counts[c + 1] += 1;
            }
            for j in 0..total {
                counts[j + 1] += counts[j];
            }
            let starts = counts.clone();
            let mut fill = counts;
            let mut items = vec![0; m];
            for (i, &c) in cells.iter().enumerate() {
                items[fill[c]] = i;
                fill[c] += 1;
            }
            Index::Buckets { per_axis, starts, items }
        };
        Ok(Self { k, points: s1.points.clone(), values: s1.values.clone(), index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `k` nearest training indices of `z`, nearest first.
    pub fn neighbors(&self, z: &[f64]) -> Vec<usize> {
        match &self.index {
            Index::Line { .. } => self.brute_force(z),
            Index::Buckets { per_axis, starts, items } => self.ring_search(z, *per_axis, starts, items),
        }
    }

    fn rank(&self, cand: &mut [(f64, usize)]) {
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }

    fn brute_force(&self, z: &[f64]) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = self.points.iter().enumerate().map(|(i, p)| (dist2(p, z), i)).collect();
        self.rank(&mut cand);
        cand.truncate(self.k);
        cand.into_iter().map(|c| c.1).collect()
    }

    fn ring_search(&self, z: &[f64], per_axis: usize, starts: &[usize], items: &[usize]) -> Vec<usize> {
        let home = bucket_of(z, per_axis);
        let h = 1.0 / per_axis as f64;
        let mut cand: Vec<(f64, usize)> = Vec::new();
        let mut axes = vec![0usize; home.len()];
        for r in 0..=per_axis {
            // Visit every bucket at Chebyshev distance exactly r from home.
            let lo: Vec<usize> = home.iter().map(|&c| c.saturating_sub(r)).collect();
            let hi: Vec<usize> = home.iter().map(|&c| (c + r).min(per_axis - 1)).collect();
            axes.copy_from_slice(&lo);
            loop {
                let ring = axes.iter().zip(&home).map(|(&a, &c)| a.abs_diff(c)).max().unwrap_or(0);
                if ring == r {
                    let b = flat(&axes, per_axis);
                    for &i in &items[starts[b]..starts[b + 1]] {
                        cand.push((dist2(self.points.get(i), z), i));
                    }
                }
                if !next_cell(&mut axes, &lo, &hi) {
                    break;
                }
            }
            if cand.len() >= self.k {
                self.rank(&mut cand);
                let reach = r as f64 * h;
                if cand[self.k - 1].0 < reach * reach {
                    break;
                }
            }
        }
        self.rank(&mut cand);
        cand.truncate(self.k);
        cand.into_iter().map(|c| c.1).collect()
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        if let Index::Line { ys, bounds, distinct: true, .. } = &self.index {
            let a = bounds.partition_point(|&b| b < z[0]);
            if a == bounds.len() || bounds[a] != z[0] {
                return ys[a..a + self.k].iter().sum::<f64>() / self.k as f64;
            }
        }
        let nb = self.neighbors(z);
        nb.iter().map(|&i| self.values[i]).sum::<f64>() / self.k as f64
    }

    /// One-dimensional runs `(lo, hi, mean)` tiling `[0, 1]`.
    fn runs(&self) -> Result<Vec<(f64, f64, f64)>> {
        let Index::Line { ys, bounds, distinct, .. } = &self.index else {
            return Err(Error::Unsupported("exact k-NN runs exist only in one dimension".into()));
        };
        if !distinct {
            return Err(Error::DuplicatePoints);
        }
        let w = bounds.len() + 1;
        Ok((0..w)
            .map(|a| {
                let lo = if a == 0 { 0.0 } else { bounds[a - 1] };
                let hi = if a + 1 == w { 1.0 } else { bounds[a] };
                let mean = ys[a..a + self.k].iter().sum::<f64>() / self.k as f64;
                (lo, hi, mean)
            })
            .collect())
    }

    /// `∫ f̂^q`, exact in one dimension (falls back to the midpoint rule
    /// there only when training coordinates repeat).
    pub fn moment(&self, q: u32, resolution: usize) -> f64 {
        if let Ok(runs) = self.runs() {
            return runs.iter().map(|(lo, hi, mean)| (hi - lo) * mean.powi(q as i32)).sum();
        }
        tensor_midpoint(self.dim(), resolution.max(1), |x| self.predict(x).powi(q as i32))
    }

    /// Half-open intervals `D_i = [lo, hi)` in one dimension, indexed like
    /// the training set (the last interval is closed at 1).
    pub fn cell_intervals(&self) -> Result<Vec<(f64, f64)>> {
        let runs = self.runs()?;
        let Index::Line { order, .. } = &self.index else { unreachable!() };
        let w = runs.len();
        let mut out = vec![(0.0, 0.0); self.len()];
        for (rank, &i) in order.iter().enumerate() {
            let first = rank.saturating_sub(self.k - 1);
            let last = rank.min(w - 1);
            out[i] = (runs[first].0, runs[last].1);
        }
        Ok(out)
    }

    /// Exact one-dimensional cell volumes.
    pub fn exact_volumes(&self) -> Result<CellVolumes> {
        let cells = self.cell_intervals()?;
        Ok(CellVolumes {
            volumes: cells.iter().map(|(lo, hi)| hi - lo).collect(),
            method: VolumeMethod::ExactOrderStatistics,
            probe_n: None,
            std_errors: vec![0.0; self.len()],
        })
    }

    /// Probe estimate `V(D_i) ≈ (1/probe_n) Σ_z 1{x_i ∈ kNN(z)}`.
    pub fn probe_volumes(&self, probe_n: usize, rng: &mut RngStream) -> Result<CellVolumes> {
        if probe_n == 0 {
            return Err(Error::InvalidParameter("probe count must be positive".into()));
        }
        let mut hits = vec![0usize; self.len()];
        let mut z = vec![0.0; self.dim()];
        for _ in 0..probe_n {
            for c in z.iter_mut() {
                *c = rng.uniform();
            }
            for i in self.neighbors(&z) {
                hits[i] += 1;
            }
        }
        let pn = probe_n as f64;
        let volumes: Vec<f64> = hits.iter().map(|&h| h as f64 / pn).collect();
        let std_errors = volumes.iter().map(|&v| (v * (1.0 - v) / pn).sqrt()).collect();
        Ok(CellVolumes { volumes, method: VolumeMethod::ProbeMonteCarlo, probe_n: Some(probe_n), std_errors })
    }
}

/// Cell volumes: exact in one dimension, probe Monte Carlo otherwise.
pub fn knn_cell_volumes(r: &KnnRegressor, probe_n: usize, rng: &mut RngStream) -> Result<CellVolumes> {
    if r.dim() == 1 {
        r.exact_volumes()
    } else {
        r.probe_volumes(probe_n, rng)
    }
}
