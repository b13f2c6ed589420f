//! Nonparametric regressors used as control variates.
//!
//! Two realizations of an oracle estimator are provided: k-nearest-neighbour
//! averaging ([`knn`]) and piecewise-constant cell means ([`grid`]). Both are
//! immutable after fitting and can be shared across threads.

pub mod grid;
pub mod knn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{RngStream, SampleSet};
use crate::testfn::TestFunction;

pub use grid::{EmptyCellPolicy, GridRegressor};
pub use knn::{CellVolumes, KnnRegressor, VolumeMethod};

/// Anything that can be evaluated pointwise on the unit cube.
pub trait Predictor: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

/// The function that is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPredictor(pub usize);

impl Predictor for ZeroPredictor {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, _: &[f64]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorSpec {
    Knn {
        k: usize,
    },
    Grid {
        cells: usize,
        #[serde(default)]
        empty: EmptyCellPolicy,
    },
}

#[derive(Debug, Clone)]
pub enum Regressor {
    Knn(KnnRegressor),
    Grid(GridRegressor),
}

pub fn fit(spec: &RegressorSpec, s1: &SampleSet) -> Result<Regressor> {
    match *spec {
        RegressorSpec::Knn { k } => fit_knn(s1, k),
        RegressorSpec::Grid { cells, empty } => fit_grid_with(s1, cells, empty),
    }
}

pub fn fit_knn(s1: &SampleSet, k: usize) -> Result<Regressor> {
    KnnRegressor::fit(s1, k).map(Regressor::Knn)
}

/// Grid regressor with empty cells predicting 0.
pub fn fit_grid(s1: &SampleSet, cells_per_axis: usize) -> Result<Regressor> {
    fit_grid_with(s1, cells_per_axis, EmptyCellPolicy::Zero)
}

pub fn fit_grid_with(s1: &SampleSet, cells_per_axis: usize, empty: EmptyCellPolicy) -> Result<Regressor> {
    GridRegressor::fit(s1, cells_per_axis, empty).map(Regressor::Grid)
}

pub(crate) fn check_domain(z: &[f64], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: z.len() });
    }
    if z.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::OutsideDomain(z.to_vec()));
    }
    Ok(())
}

/// Prediction at `z`, rejecting points outside the unit cube.
pub fn predict(r: &Regressor, z: &[f64]) -> Result<f64> {
    check_domain(z, r.dim())?;
    Ok(r.value(z))
}

impl Regressor {
    pub fn spec(&self) -> RegressorSpec {
        match self {
            Regressor::Knn(r) => RegressorSpec::Knn { k: r.k() },
            Regressor::Grid(r) => RegressorSpec::Grid { cells: r.cells_per_axis(), empty: r.empty_policy() },
        }
    }

    /// `∫ f̂^q`: exact for grids and for k-NN in one dimension, otherwise a
    /// tensor midpoint rule with `resolution` nodes per axis.
    pub fn moment(&self, q: u32, resolution: usize) -> f64 {
        match self {
            Regressor::Knn(r) => r.moment(q, resolution),
            Regressor::Grid(r) => r.moment(q),
        }
    }

    /// Whether [`Regressor::moment`] is exact for this fit.
    pub fn moment_is_exact(&self) -> bool {
        match self {
            Regressor::Knn(r) => r.dim() == 1,
            Regressor::Grid(_) => true,
        }
    }
}

impl Predictor for Regressor {
    fn dim(&self) -> usize {
        match self {
            Regressor::Knn(r) => r.dim(),
            Regressor::Grid(r) => r.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Knn(r) => r.predict(x),
            Regressor::Grid(r) => r.predict(x),
        }
    }
}

/// Lower end of the admissible range of `1/r`, i.e. `1/p - s/d`.
pub fn lr_exponent_floor(s: f64, p: f64, d: usize) -> f64 {
    1.0 / p - s / d as f64
}

/// Monte Carlo estimate of `‖f̂ - f‖_{L^r}` from `probe_n` uniform probes.
pub fn empirical_lr_error(fhat: &dyn Predictor, f: &TestFunction, r: f64, probe_n: usize, rng: &mut RngStream) -> Result<f64> {
    let d = f.dim();
    if fhat.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: fhat.dim() });
    }
    let floor = lr_exponent_floor(f.smoothness(), f.integrability(), d);
    if !(r >= 1.0) || !(1.0 / r > floor) {
        return Err(Error::InadmissibleExponent { r, s: f.smoothness(), p: f.integrability(), d });
    }
    if probe_n == 0 {
        return Err(Error::InvalidParameter("probe count must be positive".into()));
    }
    let mut z = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..probe_n {
        for c in z.iter_mut() {
            *c = rng.uniform();
        }
        acc += (fhat.value(&z) - f.eval(&z)).abs().powf(r);
    }
    Ok((acc / probe_n as f64).powf(1.0 / r))
}
