//! Moment and integral estimators.
//!
//! * plain Monte Carlo: `(1/n) Σ y_i^q`
//! * truncated Monte Carlo: `(1/n) Σ clamp(y_i, -M, M)^q`
//! * control variates: fit `f̂` on the first half, integrate `f̂^q`, then add
//!   the second-half mean of `y_i^q - f̂(x_i)^q`
//! * k-NN quadrature: the control-variate scheme with `q = 1` and a k-NN fit,
//!   either directly or through the cell-volume weights `V(D_i)/k`.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::{self, knn, Predictor, Regressor, RegressorSpec};
use crate::sampling::{split_halves, RngStream, SampleSet, SeedProvenance};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    PlainMC,
    TruncatedMC,
    CVMoment,
    KnnQuadratureDirect,
    KnnQuadratureWeights,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regressor: Option<RegressorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_resolution: Option<usize>,
    /// `∫ f̂^q` for control-variate methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_integral: Option<f64>,
    /// Second-half Monte Carlo correction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_n: Option<usize>,
    /// Standard error contributed by probe-estimated cell volumes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    pub n: usize,
    pub q: u32,
    pub params: EstimateParams,
    pub seed: Option<SeedProvenance>,
}

fn check_q(q: u32) -> Result<()> {
    if q == 0 {
        Err(Error::InvalidParameter("moment order q must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_nonempty(s: &SampleSet) -> Result<()> {
    if s.is_empty() {
        Err(Error::TooFewSamples { needed: 1, got: 0 })
    } else {
        Ok(())
    }
}

pub fn plain_mc_moment(s: &SampleSet, q: u32) -> Result<Estimate> {
    check_q(q)?;
    check_nonempty(s)?;
    let value = s.values.iter().map(|y| y.powi(q as i32)).sum::<f64>() / s.len() as f64;
    Ok(Estimate { value, method: Method::PlainMC, n: s.len(), q, params: EstimateParams::default(), seed: s.seed })
}

/// Truncation level `c · n^{1/p - s/d}`.
pub fn default_truncation(n: usize, s: f64, p: f64, d: usize, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation scale must be positive, got {c}")));
    }
    let expo = 1.0 / p - s / d as f64;
    if !(expo > 0.0) {
        return Err(Error::TruncationNotApplicable(expo));
    }
    Ok(c * (n as f64).powf(expo))
}

/// Truncation level `c · n^β` matched to a peak `‖x - x0‖^{-β}`.
pub fn peak_truncation(n: usize, beta: f64, c: f64) -> f64 {
    c * (n as f64).powf(beta)
}

pub fn truncated_mc_moment(s: &SampleSet, q: u32, cap: f64) -> Result<Estimate> {
    check_q(q)?;
    check_nonempty(s)?;
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive, got {cap}")));
    }
    let value = s.values.iter().map(|y| y.clamp(-cap, cap).powi(q as i32)).sum::<f64>() / s.len() as f64;
    Ok(Estimate {
        value,
        method: Method::TruncatedMC,
        n: s.len(),
        q,
        params: EstimateParams { truncation: Some(cap), ..Default::default() },
        seed: s.seed,
    })
}

fn check_split(s: &SampleSet) -> Result<()> {
    if s.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: s.len() });
    }
    Ok(())
}

/// Control-variate moment with a regressor fitted on the first half.
///
/// `quad_resolution` sets the per-axis midpoint nodes used for `∫ f̂^q` when
/// the fit has no exact moment; `None` picks [`knn::default_resolution`].
pub fn cv_moment(s: &SampleSet, q: u32, spec: &RegressorSpec, quad_resolution: Option<usize>) -> Result<Estimate> {
    check_q(q)?;
    check_split(s)?;
    if quad_resolution == Some(0) {
        return Err(Error::InvalidParameter("quadrature resolution must be at least 1".into()));
    }
    let (s1, s2) = split_halves(s)?;
    let fhat = regress::fit(spec, &s1)?;
    let resolution = match (&fhat, quad_resolution) {
        (_, Some(r)) => r,
        (Regressor::Knn(r), None) => knn::default_resolution(r.dim(), r.k()),
        (Regressor::Grid(_), None) => 1,
    };
    if !fhat.moment_is_exact() {
        info!("integrating f-hat^{q} with a {resolution}-per-axis midpoint rule");
    }
    let integral = fhat.moment(q, resolution);
    let mut est = cv_moment_with(&fhat, integral, &s2, q)?;
    est.n = 2 * s2.len();
    est.seed = s.seed;
    est.params.regressor = Some(*spec);
    est.params.quad_resolution = (!fhat.moment_is_exact()).then_some(resolution);
    Ok(est)
}

/// Control-variate moment for a given control `g` with known `∫ g^q`,
/// corrected on `s2`.
pub fn cv_moment_with(control: &dyn Predictor, control_integral: f64, s2: &SampleSet, q: u32) -> Result<Estimate> {
    check_q(q)?;
    check_nonempty(s2)?;
    if control.dim() != s2.dim() {
        return Err(Error::DimensionMismatch { expected: s2.dim(), got: control.dim() });
    }
    let qi = q as i32;
    let correction = s2.points.iter().zip(&s2.values).map(|(x, y)| y.powi(qi) - control.value(x).powi(qi)).sum::<f64>() / s2.len() as f64;
    Ok(Estimate {
        value: control_integral + correction,
        method: Method::CVMoment,
        n: s2.len(),
        q,
        params: EstimateParams { control_integral: Some(control_integral), correction: Some(correction), ..Default::default() },
        seed: s2.seed,
    })
}

fn knn_split(s: &SampleSet, k: usize) -> Result<(SampleSet, SampleSet, knn::KnnRegressor)> {
    if s.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: s.len() });
    }
    let half = s.len() / 2;
    if k == 0 || k > half {
        return Err(Error::KOutOfRange { k, max: half });
    }
    let (s1, s2) = split_halves(s)?;
    let r = knn::KnnRegressor::fit(&s1, k)?;
    Ok((s1, s2, r))
}

fn mean_residual(r: &dyn Predictor, s2: &SampleSet) -> f64 {
    let res: Vec<f64> = s2.points.iter().zip(&s2.values).map(|(x, y)| y - r.value(x)).collect();
    stats::mean(&res)
}

/// k-NN quadrature, direct form `∫ f̂ + mean_{S2}(y - f̂)`.
pub fn integral_knn_quadrature(s: &SampleSet, k: usize) -> Result<Estimate> {
    integral_knn_quadrature_with(s, k, None)
}

/// As [`integral_knn_quadrature`] with an explicit midpoint resolution for `d >= 2`.
pub fn integral_knn_quadrature_with(s: &SampleSet, k: usize, resolution: Option<usize>) -> Result<Estimate> {
    let (_, s2, r) = knn_split(s, k)?;
    let res = resolution.unwrap_or_else(|| knn::default_resolution(r.dim(), k));
    let integral = r.moment(1, res);
    let fhat = Regressor::Knn(r);
    let correction = mean_residual(&fhat, &s2);
    Ok(Estimate {
        value: integral + correction,
        method: Method::KnnQuadratureDirect,
        n: s.len(),
        q: 1,
        params: EstimateParams {
            k: Some(k),
            quad_resolution: (s.dim() > 1).then_some(res),
            control_integral: Some(integral),
            correction: Some(correction),
            ..Default::default()
        },
        seed: s.seed,
    })
}

/// k-NN quadrature through the weights `V(D_i)/k` and the indicator form of
/// `f̂`, using exact cells (one dimension only).
pub fn integral_weights_form(s: &SampleSet, k: usize) -> Result<Estimate> {
    if s.dim() != 1 {
        return Err(Error::Unsupported("exact cell volumes need d = 1; use integral_weights_form_probed".into()));
    }
    let (s1, s2, r) = knn_split(s, k)?;
    let cells = r.cell_intervals()?;
    let kf = k as f64;
    let weighted: f64 = cells.iter().zip(&s1.values).map(|((lo, hi), y)| (hi - lo) / kf * y).sum();
    let member = |z: f64, (lo, hi): (f64, f64)| z >= lo && (z < hi || (hi == 1.0 && z == 1.0));
    let residuals: Vec<f64> = s2
        .points
        .flat()
        .iter()
        .zip(&s2.values)
        .map(|(&z, y)| {
            let fz: f64 = cells.iter().zip(&s1.values).filter(|(c, _)| member(z, **c)).map(|(_, yj)| yj).sum::<f64>() / kf;
            y - fz
        })
        .collect();
    let correction = stats::mean(&residuals);
    Ok(Estimate {
        value: weighted + correction,
        method: Method::KnnQuadratureWeights,
        n: s.len(),
        q: 1,
        params: EstimateParams { k: Some(k), control_integral: Some(weighted), correction: Some(correction), ..Default::default() },
        seed: s.seed,
    })
}

/// Weights form with probe-estimated cell volumes, any dimension.
pub fn integral_weights_form_probed(s: &SampleSet, k: usize, probe_n: usize, rng: &mut RngStream) -> Result<Estimate> {
    if probe_n < 2 {
        return Err(Error::InvalidParameter("probe count must be at least 2".into()));
    }
    let (s1, s2, r) = knn_split(s, k)?;
    let d = s.dim();
    let mut hits = vec![0usize; s1.len()];
    let mut probe_values = Vec::with_capacity(probe_n);
    let mut z = vec![0.0; d];
    for _ in 0..probe_n {
        for c in z.iter_mut() {
            *c = rng.uniform();
        }
        let nb = r.neighbors(&z);
        probe_values.push(nb.iter().map(|&i| s1.values[i]).sum::<f64>() / k as f64);
        for i in nb {
            hits[i] += 1;
        }
    }
    let pn = probe_n as f64;
    let weighted: f64 = hits.iter().zip(&s1.values).map(|(&h, y)| h as f64 / pn / k as f64 * y).sum();
    let fhat = Regressor::Knn(r);
    let correction = mean_residual(&fhat, &s2);
    Ok(Estimate {
        value: weighted + correction,
        method: Method::KnnQuadratureWeights,
        n: s.len(),
        q: 1,
        params: EstimateParams {
            k: Some(k),
            control_integral: Some(weighted),
            correction: Some(correction),
            probe_n: Some(probe_n),
            probe_se: Some(stats::std_error(&probe_values)),
            ..Default::default()
        },
        seed: s.seed,
    })
}
