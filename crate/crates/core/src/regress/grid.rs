//! Piecewise-constant regression on a uniform `cells^d` grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SampleSet;

/// What an empty cell predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCellPolicy {
    /// Empty cells predict 0.
    #[default]
    Zero,
    /// Empty cells copy the nearest non-empty cell (ties to the lower cell index).
    NearestFilled,
}

#[derive(Debug, Clone)]
pub struct GridRegressor {
    dim: usize,
    cells: usize,
    empty: EmptyCellPolicy,
    means: Vec<f64>,
    counts: Vec<usize>,
}

fn cell_of(x: &[f64], cells: usize) -> usize {
    let mut j = 0;
    for &xi in x {
        let i = ((xi * cells as f64).floor().max(0.0) as usize).min(cells - 1);
        j = j * cells + i;
    }
    j
}

fn cell_axes(mut j: usize, cells: usize, dim: usize) -> Vec<usize> {
    let mut out = vec![0; dim];
    for a in (0..dim).rev() {
        out[a] = j % cells;
        j /= cells;
    }
    out
}

impl GridRegressor {
    pub fn fit(s1: &SampleSet, cells: usize, empty: EmptyCellPolicy) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter("cells per axis must be at least 1".into()));
        }
        let dim = s1.dim();
        let total = cells
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 26)
            .ok_or_else(|| Error::InvalidParameter(format!("{cells}^{dim} grid cells is too many")))?;
        let mut sums = vec![0.0; total];
        let mut counts = vec![0usize; total];
        for (p, &y) in s1.points.iter().zip(&s1.values) {
            let j = cell_of(p, cells);
            sums[j] += y;
            counts[j] += 1;
        }
        let mut means: Vec<f64> = sums.iter().zip(&counts).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        if empty == EmptyCellPolicy::NearestFilled {
            fill_empty(&mut means, &counts, cells, dim);
        }
        Ok(Self { dim, cells, empty, means, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn empty_policy(&self) -> EmptyCellPolicy {
        self.empty
    }

    pub fn empty_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.means[cell_of(x, self.cells)]
    }

    /// `∫ f̂^q`, exact cell by cell.
    pub fn moment(&self, q: u32) -> f64 {
        let vol = 1.0 / self.means.len() as f64;
        self.means.iter().map(|m| m.powi(q as i32)).sum::<f64>() * vol
    }
}

fn fill_empty(means: &mut [f64], counts: &[usize], cells: usize, dim: usize) {
    if counts.iter().all(|&c| c == 0) {
        return;
    }
    if dim == 1 {
        // Distance to the nearest filled cell on each side; ties go left.
        let n = means.len();
        let mut left: Vec<Option<usize>> = vec![None; n];
        let mut last = None;
        for j in 0..n {
            if counts[j] > 0 {
                last = Some(j);
            }
            left[j] = last;
        }
        let mut next = None;
        for j in (0..n).rev() {
            if counts[j] > 0 {
                next = Some(j);
                continue;
            }
            let src = match (left[j], next) {
                (Some(l), Some(r)) => {
                    if j - l <= r - j {
                        l
                    } else {
                        r
                    }
                }
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("at least one cell is filled"),
            };
            means[j] = means[src];
        }
        return;
    }
    let filled: Vec<(usize, Vec<usize>)> = (0..means.len()).filter(|&j| counts[j] > 0).map(|j| (j, cell_axes(j, cells, dim))).collect();
    let source = means.to_vec();
    for j in 0..means.len() {
        if counts[j] > 0 {
            continue;
        }
        let here = cell_axes(j, cells, dim);
        let mut best = (usize::MAX, usize::MAX);
        for (idx, axes) in &filled {
            let d2: usize = axes.iter().zip(&here).map(|(&a, &b)| a.abs_diff(b).pow(2)).sum();
            if d2 < best.0 {
                best = (d2, *idx);
            }
        }
        means[j] = source[best.1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::PointSet;

    fn set(xs: &[f64], ys: &[f64]) -> SampleSet {
        SampleSet::from_parts(PointSet::from_scalars(xs), ys.to_vec()).unwrap()
    }

    #[test]
    fn one_cell_is_global_mean() {
        let g = GridRegressor::fit(&set(&[0.1, 0.5, 0.9], &[1.0, 2.0, 6.0]), 1, EmptyCellPolicy::Zero).unwrap();
        assert_eq!(g.predict(&[0.3]), 3.0);
        assert_eq!(g.moment(2), 9.0);
    }

    #[test]
    fn empty_cell_predicts_zero() {
        let g = GridRegressor::fit(&set(&[0.1, 0.9], &[1.0, 2.0]), 4, EmptyCellPolicy::Zero).unwrap();
        assert_eq!(g.predict(&[0.4]), 0.0);
        assert_eq!(g.empty_cells(), 2);
        assert_eq!(g.moment(1), 0.75);
    }

    #[test]
    fn nearest_filled_copies_neighbour() {
        let g = GridRegressor::fit(&set(&[0.1, 0.9], &[1.0, 2.0]), 4, EmptyCellPolicy::NearestFilled).unwrap();
        assert_eq!(g.predict(&[0.3]), 1.0);
        assert_eq!(g.predict(&[0.6]), 2.0);
        let five = GridRegressor::fit(&set(&[0.1, 0.9], &[1.0, 2.0]), 5, EmptyCellPolicy::NearestFilled).unwrap();
        // middle cell is equidistant; the left neighbour wins
        assert_eq!(five.predict(&[0.5]), 1.0);
    }

    #[test]
    fn nearest_filled_two_dim() {
        let pts = PointSet::from_rows(2, &[vec![0.1, 0.1], vec![0.9, 0.9]]).unwrap();
        let s = SampleSet::from_parts(pts, vec![1.0, 3.0]).unwrap();
        let g = GridRegressor::fit(&s, 3, EmptyCellPolicy::NearestFilled).unwrap();
        assert_eq!(g.predict(&[0.1, 0.5]), 1.0);
        assert_eq!(g.predict(&[0.9, 0.5]), 3.0);
        assert_eq!(g.predict(&[0.5, 0.5]), 1.0);
    }

    #[test]
    fn constant_values_reproduced() {
        let g = GridRegressor::fit(&set(&[0.05, 0.3, 0.55, 0.8], &[0.7; 4]), 4, EmptyCellPolicy::Zero).unwrap();
        for x in [0.0, 0.3, 0.6, 1.0] {
            assert_eq!(g.predict(&[x]), 0.7);
        }
    }

    #[test]
    fn linear_sup_error_shrinks_like_cell_width() {
        // dense noiseless data: sup error is at most one cell width
        let xs: Vec<f64> = (0..4096).map(|i| (i as f64 + 0.5) / 4096.0).collect();
        let s = set(&xs, &xs);
        let mut last = f64::INFINITY;
        for cells in [4usize, 16, 64] {
            let g = GridRegressor::fit(&s, cells, EmptyCellPolicy::Zero).unwrap();
            let sup = (0..=10_000).map(|i| i as f64 / 10_000.0).map(|z| (g.predict(&[z]) - z).abs()).fold(0.0, f64::max);
            assert!(sup <= 1.0 / cells as f64, "cells {cells}: {sup}");
            assert!(sup < last / 3.0);
            last = sup;
        }
    }
}
