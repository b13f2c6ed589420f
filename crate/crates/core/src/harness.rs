//! Sample-size sweeps with replications, error statistics, log-log slope
//! fits and comparison against the closed-form exponents.
//!
//! Every `(n, rep)` cell draws from its own substream `(n << 32) | rep` of the
//! base seed, so a sweep is a pure function of its config regardless of how
//! many threads evaluate it.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{self, Estimate, EstimateParams};
use crate::rate_theory::{self, Regime};
use crate::regress::{EmptyCellPolicy, RegressorSpec};
use crate::sampling::{observe, sample_uniform, RngStream};
use crate::stats::{self, LineFit};
use crate::testfn::{self, AmplitudeExponent, BumpVariant, TestFunction};

/// Absolute tolerance for reference moments.
pub const REFERENCE_TOL: f64 = 1e-12;
pub const MIN_REPS: usize = 30;
pub const MIN_GRID: usize = 4;

/// Test function selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        c: f64,
        #[serde(default = "one_dim")]
        d: usize,
    },
    SinePlusTwo {
        #[serde(default = "one_dim")]
        d: usize,
    },
    OnePlusBump {
        #[serde(default = "one_dim")]
        d: usize,
    },
    Linear {
        #[serde(default = "one_dim")]
        d: usize,
    },
    BumpBase {
        variant: BumpVariant,
        #[serde(default = "one_dim")]
        d: usize,
    },
    ScaledBump {
        m: usize,
        j: usize,
        s: f64,
        p: f64,
        #[serde(default = "one_dim")]
        d: usize,
        amplitude: AmplitudeExponent,
    },
    Peak {
        beta: f64,
        x0: Vec<f64>,
        q: u32,
        p: f64,
        s: f64,
    },
}

fn one_dim() -> usize {
    1
}

impl FunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        Ok(match self {
            Self::Constant { c, d } => TestFunction::constant(*c, *d),
            Self::SinePlusTwo { d } => TestFunction::sine_plus_two(*d),
            Self::OnePlusBump { d } => TestFunction::one_plus_bump(*d),
            Self::Linear { d } => TestFunction::linear(*d),
            Self::BumpBase { variant, d } => TestFunction::bump_base(*variant, *d),
            Self::ScaledBump { m, j, s, p, d, amplitude } => testfn::make_scaled_bump(*m, *j, *s, *p, *d, *amplitude)?,
            Self::Peak { beta, x0, q, p, s } => testfn::make_peak(*beta, x0, *q, *p, *s)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { d, .. }
            | Self::SinePlusTwo { d }
            | Self::OnePlusBump { d }
            | Self::Linear { d }
            | Self::BumpBase { d, .. }
            | Self::ScaledBump { d, .. } => *d,
            Self::Peak { x0, .. } => x0.len(),
        }
    }
}

/// Neighbour count, fixed or from [`rate_theory::optimal_k_scaled`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KSchedule {
    Fixed(usize),
    Optimal {
        s: f64,
        #[serde(default = "unit")]
        c: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl KSchedule {
    pub fn at(&self, n: usize, d: usize, gamma: f64) -> Result<usize> {
        match *self {
            Self::Fixed(k) => Ok(k),
            Self::Optimal { s, c } => rate_theory::optimal_k_scaled(n, s, d, gamma, c),
        }
    }
}

/// Truncation level `M`, fixed or growing with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Truncation {
    Fixed(f64),
    /// `c · n^{1/p - s/d}`
    Default {
        s: f64,
        p: f64,
        #[serde(default = "unit")]
        c: f64,
    },
    /// `c · n^β`
    Peak {
        beta: f64,
        #[serde(default = "unit")]
        c: f64,
    },
}

impl Truncation {
    pub fn at(&self, n: usize, d: usize) -> Result<f64> {
        match *self {
            Self::Fixed(m) => Ok(m),
            Self::Default { s, p, c } => estimators::default_truncation(n, s, p, d, c),
            Self::Peak { beta, c } => Ok(estimators::peak_truncation(n, beta, c)),
        }
    }
}

/// Grid resolution per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CellsSchedule {
    Fixed(usize),
    /// `n / 2` cells per axis.
    HalfN,
}

/// Control regressor for the moment estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CvRegressor {
    Knn {
        k: KSchedule,
    },
    Grid {
        cells: CellsSchedule,
        #[serde(default)]
        empty: EmptyCellPolicy,
    },
}

impl CvRegressor {
    pub fn at(&self, n: usize, d: usize, gamma: f64) -> Result<RegressorSpec> {
        Ok(match *self {
            Self::Knn { k } => RegressorSpec::Knn { k: k.at(n, d, gamma)? },
            Self::Grid { cells, empty } => {
                let cells = match cells {
                    CellsSchedule::Fixed(c) => c,
                    CellsSchedule::HalfN => (n / 2).max(1),
                };
                RegressorSpec::Grid { cells, empty }
            }
        })
    }
}

/// Estimator selection with possibly `n`-dependent parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    PlainMc,
    TruncatedMc {
        truncation: Truncation,
    },
    CvMoment {
        regressor: CvRegressor,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    KnnQuadrature {
        k: KSchedule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    KnnWeights {
        k: KSchedule,
        /// Probe count for `d >= 2`; exact cells are used in `d = 1`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probe_n: Option<usize>,
    },
}

impl EstimatorSpec {
    fn integral_only(&self) -> bool {
        matches!(self, Self::KnnQuadrature { .. } | Self::KnnWeights { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Root-mean-square error across replications.
    #[default]
    Rmse,
    /// Median absolute error, for heavy-tailed errors.
    MedianAbs,
}

/// Overrides and tolerance for the theory comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    /// Smoothness; defaults to the function's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Integrability; defaults to the function's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

fn default_tol() -> f64 {
    0.2
}

/// One experiment: a function, an estimator and either a single `n` or an `n` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionSpec,
    pub estimator: EstimatorSpec,
    #[serde(default = "first_moment")]
    pub q: u32,
    #[serde(default = "noiseless", with = "gamma_serde")]
    pub gamma: f64,
    #[serde(default)]
    pub base_seed: u64,
    /// Sample size for a single estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<usize>,
    #[serde(default = "min_reps")]
    pub reps: usize,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheorySpec>,
    /// Output directory for sweep artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn first_moment() -> u32 {
    1
}

fn noiseless() -> f64 {
    f64::INFINITY
}

fn min_reps() -> usize {
    MIN_REPS
}

/// `gamma` is a number or the string `"inf"`.
mod gamma_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(g: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if g.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*g)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("gamma must be a number or \"inf\", got {t:?}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_common()?;
        Ok(cfg)
    }

    fn check_common(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be in [0, inf], got {}", self.gamma)));
        }
        if self.estimator.integral_only() && self.q != 1 {
            return Err(Error::Config("k-NN quadrature estimates the integral; set q = 1".into()));
        }
        Ok(())
    }

    /// Checks the sweep invariants: a strictly increasing grid of at least
    /// four sizes and at least thirty replications.
    pub fn validate_sweep(&self) -> Result<()> {
        self.check_common()?;
        if self.n_grid.len() < MIN_GRID {
            return Err(Error::Config(format!("n_grid needs at least {MIN_GRID} sizes, got {}", self.n_grid.len())));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid sizes must be positive".into()));
        }
        if self.reps < MIN_REPS {
            return Err(Error::Config(format!("reps must be at least {MIN_REPS}, got {}", self.reps)));
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Substream index of cell `(n, rep)`.
pub fn cell_stream(n: usize, rep: usize) -> u64 {
    ((n as u64) << 32) | rep as u64
}

/// Draws `n` noisy observations of `f` from `rng` and applies the estimator.
pub fn estimate_once(f: &TestFunction, est: &EstimatorSpec, n: usize, q: u32, gamma: f64, rng: &mut RngStream) -> Result<Estimate> {
    let d = f.dim();
    let points = sample_uniform(n, d, rng)?;
    let s = observe(f, points, gamma, n, rng)?;
    match est {
        EstimatorSpec::PlainMc => estimators::plain_mc_moment(&s, q),
        EstimatorSpec::TruncatedMc { truncation } => estimators::truncated_mc_moment(&s, q, truncation.at(n, d)?),
        EstimatorSpec::CvMoment { regressor, resolution } => estimators::cv_moment(&s, q, &regressor.at(n, d, gamma)?, *resolution),
        EstimatorSpec::KnnQuadrature { k, resolution } => estimators::integral_knn_quadrature_with(&s, k.at(n, d, gamma)?, *resolution),
        EstimatorSpec::KnnWeights { k, probe_n } => {
            let k = k.at(n, d, gamma)?;
            if d == 1 {
                estimators::integral_weights_form(&s, k)
            } else {
                estimators::integral_weights_form_probed(&s, k, probe_n.unwrap_or(100 * n), rng)
            }
        }
    }
}

/// A single estimate for `cfg.n`, drawn from substream `(n, 0)`.
pub fn run_estimate(cfg: &ExperimentConfig) -> Result<Estimate> {
    cfg.check_common()?;
    let n = cfg.n.ok_or_else(|| Error::Config("a single estimate needs the field `n`".into()))?;
    let f = cfg.function.build()?;
    let mut rng = RngStream::new(cfg.base_seed, cell_stream(n, 0));
    estimate_once(&f, &cfg.estimator, n, cfg.q, cfg.gamma, &mut rng)
}

/// Outcome of one `(n, rep)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub rep: usize,
    pub stream: u64,
    pub value: Option<f64>,
    /// `value - reference`
    pub error: Option<f64>,
    pub params: Option<EstimateParams>,
    pub failure: Option<String>,
}

/// Error statistic at one grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub stat: f64,
    /// Replications that produced an estimate.
    pub n_reps: usize,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub reference: f64,
    pub cells: Vec<CellRecord>,
    pub per_n: Vec<SizeSummary>,
}

impl SweepResult {
    pub fn errors_at(&self, n: usize) -> Vec<f64> {
        self.cells.iter().filter(|c| c.n == n).filter_map(|c| c.error).collect()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failure.is_some()).count()
    }
}

/// Runs every `(n, rep)` cell on the current rayon pool.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate_sweep()?;
    let f = cfg.function.build()?;
    let reference = testfn::reference_moment(&f, cfg.q, REFERENCE_TOL)?;
    let jobs: Vec<(usize, usize)> = cfg.n_grid.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();
    let cells: Vec<CellRecord> = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let stream = cell_stream(n, rep);
            let mut rng = RngStream::new(cfg.base_seed, stream);
            match estimate_once(&f, &cfg.estimator, n, cfg.q, cfg.gamma, &mut rng) {
                Ok(e) => CellRecord {
                    n,
                    rep,
                    stream,
                    value: Some(e.value),
                    error: Some(e.value - reference),
                    params: Some(e.params),
                    failure: None,
                },
                Err(err) => CellRecord { n, rep, stream, value: None, error: None, params: None, failure: Some(err.to_string()) },
            }
        })
        .collect();
    let failures = cells.iter().filter(|c| c.failure.is_some()).count();
    if failures > 0 {
        warn!("{failures} of {} cells failed", cells.len());
    }
    let per_n = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = cells.iter().filter(|c| c.n == n).filter_map(|c| c.error).collect();
            let (stat, stderr) = statistic(&errs, cfg.statistic);
            SizeSummary { n, stat, n_reps: errs.len(), stderr }
        })
        .collect();
    Ok(SweepResult { config: cfg.clone(), reference, cells, per_n })
}

/// The statistic of `errors` and its standard error.
///
/// RMSE uses the delta method on the mean squared error. The median's
/// standard error is half the spread between the order statistics one
/// binomial standard deviation either side of the middle.
pub fn statistic(errors: &[f64], kind: Statistic) -> (f64, f64) {
    let r = errors.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    match kind {
        Statistic::Rmse => {
            let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
            let mse = stats::mean(&sq);
            let rmse = mse.sqrt();
            let se = if r > 1 && rmse > 0.0 { stats::std_error(&sq) / (2.0 * rmse) } else { 0.0 };
            (rmse, se)
        }
        Statistic::MedianAbs => {
            let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let med = stats::median(&abs);
            let half = (r as f64).sqrt() / 2.0;
            let mid = r as f64 / 2.0;
            let lo = ((mid - half).floor().max(0.0) as usize).min(r - 1);
            let hi = ((mid + half).ceil() as usize).min(r - 1);
            (med, (abs[hi] - abs[lo]) / 2.0)
        }
    }
}

/// Least-squares fit of log error against log n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub ns: Vec<usize>,
    pub stats: Vec<f64>,
    pub fit: Option<LineFit>,
    /// Some statistic was zero: the estimator is exact at these sizes.
    pub below_floor: bool,
    pub theory: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Option<bool>,
    pub warnings: Vec<String>,
}

impl RateReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Fits a power law to `(n, stat)` pairs.
pub fn fit_power_law(ns: &[usize], values: &[f64]) -> Result<RateReport> {
    if ns.len() != values.len() {
        return Err(Error::InvalidParameter("sizes and statistics differ in length".into()));
    }
    if ns.len() < MIN_GRID {
        return Err(Error::InvalidParameter(format!("slope fit needs at least {MIN_GRID} points, got {}", ns.len())));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("error statistics must be finite and non-negative".into()));
    }
    let below_floor = values.contains(&0.0);
    let fit = if below_floor {
        None
    } else {
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        stats::fit_loglog(&xs, values)
    };
    let mut warnings = Vec::new();
    if below_floor {
        warnings.push("below measurement floor: some error statistics are exactly zero".into());
    }
    Ok(RateReport { ns: ns.to_vec(), stats: values.to_vec(), fit, below_floor, theory: None, tolerance: None, verdict: None, warnings })
}

pub fn fit_slope(result: &SweepResult) -> Result<RateReport> {
    let ns: Vec<usize> = result.per_n.iter().map(|s| s.n).collect();
    let values: Vec<f64> = result.per_n.iter().map(|s| s.stat).collect();
    fit_power_law(&ns, &values)
}

/// Inputs to the theoretical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub s: f64,
    pub p: f64,
    pub q: u32,
    pub d: usize,
    pub gamma: f64,
}

/// The exponent that applies to `est` and any regime warnings.
pub fn theoretical_exponent(est: &EstimatorSpec, t: &TheoryInputs) -> Result<(f64, Vec<String>)> {
    let mut warnings = Vec::new();
    let moment_regime = || rate_theory::regime(t.s, t.p, t.q, t.d);
    let exponent = match est {
        EstimatorSpec::KnnQuadrature { .. } | EstimatorSpec::KnnWeights { .. } => rate_theory::integral_exponent(t.s, t.d, t.gamma)?,
        EstimatorSpec::PlainMc => {
            if let Ok(r) = moment_regime() {
                if r.regime == Regime::RareEvent {
                    warnings.push("plain Monte Carlo in the rare-event regime: the q-th power may have infinite variance".into());
                }
            }
            -0.5
        }
        EstimatorSpec::TruncatedMc { truncation: Truncation::Peak { beta, .. } } => rate_theory::peak_truncated_exponent(*beta, t.q),
        EstimatorSpec::TruncatedMc { .. } => moment_regime()?.exponent,
        EstimatorSpec::CvMoment { .. } => {
            let r = moment_regime()?;
            if r.regime == Regime::RareEvent {
                warnings.push(format!(
                    "control variates requested in the rare-event regime (s = {} < {}); truncated Monte Carlo is recommended",
                    t.s, r.thresholds.method_transition
                ));
            }
            r.exponent
        }
    };
    Ok((exponent, warnings))
}

/// Attaches the theoretical exponent and verdict `|slope - exponent| <= tol`.
pub fn compare_to_theory(report: &RateReport, est: &EstimatorSpec, t: &TheoryInputs, tol: f64) -> Result<RateReport> {
    let (exponent, warnings) = theoretical_exponent(est, t)?;
    let mut out = report.clone();
    out.theory = Some(exponent);
    out.tolerance = Some(tol);
    out.verdict = out.slope().map(|s| (s - exponent).abs() <= tol);
    for w in warnings {
        warn!("{w}");
        out.warnings.push(w);
    }
    Ok(out)
}

/// Theory inputs for `cfg`, using the function's own regularity unless overridden.
pub fn theory_inputs(cfg: &ExperimentConfig) -> Result<TheoryInputs> {
    let f = cfg.function.build()?;
    let over = cfg.theory;
    Ok(TheoryInputs {
        s: over.and_then(|t| t.s).unwrap_or(f.smoothness()),
        p: over.and_then(|t| t.p).unwrap_or(f.integrability()),
        q: cfg.q,
        d: f.dim(),
        gamma: cfg.gamma,
    })
}

/// Fit plus theory comparison for a finished sweep.
pub fn rate_report(result: &SweepResult) -> Result<RateReport> {
    let report = fit_slope(result)?;
    let cfg = &result.config;
    let tol = cfg.theory.map_or_else(default_tol, |t| t.tolerance);
    let inputs = theory_inputs(cfg)?;
    match compare_to_theory(&report, &cfg.estimator, &inputs, tol) {
        Ok(r) => Ok(r),
        Err(e) => {
            let mut r = report;
            r.warnings.push(format!("no theoretical exponent: {e}"));
            Ok(r)
        }
    }
}

/// Regime warnings for a single estimate, if the config has any.
pub fn regime_warnings(cfg: &ExperimentConfig) -> Vec<String> {
    let Ok(inputs) = theory_inputs(cfg) else { return Vec::new() };
    theoretical_exponent(&cfg.estimator, &inputs).map(|(_, w)| w).unwrap_or_default()
}
