//! Temporal monitoring: residuals, the projection statistic `P⁺`, its
//! standardized maximum over the penalty grid, the upper CUSUM chart and
//! Monte-Carlo calibration of the control limit.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_set, BasisConfig};
use crate::error::{dim_err, invalid, Error, Result};
use crate::model::{ModelFit, ProblemData, DEFAULT_CLAMP};
use crate::rng::{stream, StreamRng};
use crate::solver::{fit_path, geometric_grid, lambda_max, FitPath, SolverConfig};

/// Background-only mean counts at period `t`, flattened over `(location, category)`.
fn background_slice(fit: &ModelFit, data: &ProblemData, t: usize) -> Vec<f64> {
    let [n1, n2, _] = data.dims();
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let u = fit.u_hat.get(i, j, t).clamp(-DEFAULT_CLAMP, DEFAULT_CLAMP);
            out.push(data.pop().get(i, j, t) * u.exp());
        }
    }
    out
}

fn check_period(data: &ProblemData, t: usize) -> Result<()> {
    let n3 = data.dims()[2];
    if t >= n3 {
        return dim_err(format!("period {t} out of range 0..{n3}"));
    }
    Ok(())
}

/// `y_t - μ̂_t` on the count scale, where `μ̂_t` uses the smooth background
/// only; divided by `sqrt(μ̂_t)` when `pearson` is set.
pub fn residual(fit: &ModelFit, data: &ProblemData, t: usize, pearson: bool) -> Result<Vec<f64>> {
    check_period(data, t)?;
    let [n1, n2, _] = data.dims();
    let mu = background_slice(fit, data, t);
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let m = mu[i * n2 + j];
            let r = data.y().get(i, j, t) - m;
            out.push(if pearson { r / m.sqrt() } else { r });
        }
    }
    Ok(out)
}

/// `P⁺_t = ĥ⁺ᵀ r_t / ‖ĥ⁺‖`, with `ĥ⁺` the positive part of the hot-spot
/// slice; zero when no entry is positive.
pub fn p_plus(fit: &ModelFit, data: &ProblemData, t: usize, pearson: bool) -> Result<f64> {
    let r = residual(fit, data, t, pearson)?;
    let [n1, n2, _] = data.dims();
    let mut dot = 0.0;
    let mut norm2 = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let h = fit.h_hat.get(i, j, t).max(0.0);
            dot += h * r[i * n2 + j];
            norm2 += h * h;
        }
    }
    Ok(if norm2 > 0.0 { dot / norm2.sqrt() } else { 0.0 })
}

/// `P⁺` for every fit on a path at every period: `table[k][t]`, `None` where
/// the fit at penalty `k` failed.
pub fn p_plus_table(path: &FitPath, data: &ProblemData, pearson: bool) -> Vec<Vec<Option<f64>>> {
    let n3 = data.dims()[2];
    (0..path.len())
        .map(|k| match path.fit(k) {
            Some(f) => (0..n3).map(|t| p_plus(f, data, t, pearson).ok()).collect(),
            None => vec![None; n3],
        })
        .collect()
}

/// In-control mean and variance of `P⁺` for each penalty. Penalties whose
/// phase-I values have zero variance (or any failed fit) are unusable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H0Moments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub usable: Vec<bool>,
    pub sample_size: usize,
}

/// Minimum number of phase-I periods.
pub const MIN_PHASE1: usize = 5;

/// Sample mean and variance (denominator `m - 1`) per penalty over phase-I
/// values `phase1[k]`.
pub fn estimate_h0_moments(phase1: &[Vec<Option<f64>>]) -> Result<H0Moments> {
    let m = phase1.first().map_or(0, Vec::len);
    if m < MIN_PHASE1 {
        return invalid(format!("need at least {MIN_PHASE1} phase-I periods, got {m}"));
    }
    let mut mean = Vec::with_capacity(phase1.len());
    let mut var = Vec::with_capacity(phase1.len());
    let mut usable = Vec::with_capacity(phase1.len());
    for row in phase1 {
        if row.len() != m {
            return dim_err("ragged phase-I table");
        }
        let vals: Option<Vec<f64>> = row.iter().copied().collect();
        match vals {
            Some(v) => {
                let mu = v.iter().sum::<f64>() / m as f64;
                let s2 = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (m - 1) as f64;
                let ok = s2 > 1e-12 * mu.abs().max(1.0).powi(2) && s2.is_finite();
                mean.push(mu);
                var.push(s2);
                usable.push(ok);
            }
            None => {
                mean.push(0.0);
                var.push(0.0);
                usable.push(false);
            }
        }
    }
    Ok(H0Moments { mean, var, usable, sample_size: m })
}

impl H0Moments {
    pub fn usable_count(&self) -> usize {
        self.usable.iter().filter(|u| **u).count()
    }
}

/// `max_k (P⁺(λ_k) - E_k) / sqrt(Var_k)` over usable penalties, with the
/// maximizing index. Ties go to the earlier index, i.e. the larger penalty on
/// a descending grid. Missing values are skipped.
pub fn p_tilde(values: &[Option<f64>], moments: &H0Moments) -> Result<(f64, usize)> {
    if values.len() != moments.mean.len() {
        return dim_err(format!("{} values for {} penalties", values.len(), moments.mean.len()));
    }
    let mut best: Option<(f64, usize)> = None;
    for (k, v) in values.iter().enumerate() {
        let Some(v) = v else { continue };
        if !moments.usable[k] {
            continue;
        }
        let z = (v - moments.mean[k]) / moments.var[k].sqrt();
        if best.is_none_or(|(b, _)| z > b) {
            best = Some((z, k));
        }
    }
    best.ok_or_else(|| Error::Invalid("no usable penalty in the grid".into()))
}

/// `max(0, w + p - d)`.
#[inline]
pub fn cusum_update(w_prev: f64, p_tilde: f64, d_star: f64) -> f64 {
    (w_prev + p_tilde - d_star).max(0.0)
}

/// One processed period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub period: usize,
    pub lambda_index: Option<usize>,
    pub lambda: f64,
    pub p_plus: f64,
    pub p_tilde: f64,
    pub w: f64,
    pub alarm: bool,
    /// Set when the fit at this period failed and `P̃` was taken as zero.
    pub failed: bool,
}

/// Upper CUSUM chart on `P̃`.
#[derive(Debug, Clone)]
pub struct CusumChart {
    pub grid: Vec<f64>,
    pub moments: H0Moments,
    pub d_star: f64,
    pub limit: f64,
    pub w: f64,
    pub history: Vec<ChartRecord>,
}

impl CusumChart {
    pub fn new(grid: Vec<f64>, moments: H0Moments, d_star: f64, limit: f64) -> Result<Self> {
        if grid.len() != moments.mean.len() {
            return dim_err("grid and moments disagree in length");
        }
        if limit.is_nan() || limit < 0.0 {
            return invalid(format!("control limit must be nonnegative, got {limit}"));
        }
        Ok(Self { grid, moments, d_star, limit, w: 0.0, history: Vec::new() })
    }

    /// Feed the `P⁺` values of period `t`; returns whether the chart alarms.
    pub fn observe(&mut self, period: usize, values: Option<&[Option<f64>]>) -> Result<bool> {
        if let Some(last) = self.history.last() {
            if period <= last.period {
                return invalid(format!("period {period} does not follow {}", last.period));
            }
        }
        let picked = values.map(|v| p_tilde(v, &self.moments)).transpose();
        let (p_t, k, failed) = match picked {
            Ok(Some((p, k))) => (p, Some(k), false),
            Ok(None) | Err(_) => (0.0, None, true),
        };
        self.w = cusum_update(self.w, p_t, self.d_star);
        let alarm = self.w > self.limit;
        self.history.push(ChartRecord {
            period,
            lambda_index: k,
            lambda: k.map_or(f64::NAN, |k| self.grid[k]),
            p_plus: match (values, k) {
                (Some(v), Some(k)) => v[k].unwrap_or(f64::NAN),
                _ => f64::NAN,
            },
            p_tilde: p_t,
            w: self.w,
            alarm,
            failed,
        });
        Ok(alarm)
    }

    pub fn reset(&mut self) {
        self.w = 0.0;
        self.history.clear();
    }
}

/// Source of in-control `P̃` values for calibration.
pub trait InControlGenerator: Sync {
    fn sample(&self, rng: &mut StreamRng) -> f64;
}

/// `P̃ ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardNormalStream;

impl InControlGenerator for StandardNormalStream {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        rng.sample(StandardNormal)
    }
}

/// Resample observed in-control values with replacement.
#[derive(Debug, Clone)]
pub struct BootstrapStream(pub Vec<f64>);

impl InControlGenerator for BootstrapStream {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.0[rng.random_range(0..self.0.len())]
    }
}

/// A constant stream; handy for checking chart arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct ConstantStream(pub f64);

impl InControlGenerator for ConstantStream {
    fn sample(&self, _rng: &mut StreamRng) -> f64 {
        self.0
    }
}

impl<F> InControlGenerator for F
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        self(rng)
    }
}

/// First `t` (1-based) with `W_t > limit`, or `cap` when none occurs.
pub fn run_length<G: InControlGenerator + ?Sized>(
    generator: &G,
    d_star: f64,
    limit: f64,
    rng: &mut StreamRng,
    cap: usize,
) -> usize {
    let mut w = 0.0;
    for t in 1..=cap {
        w = cusum_update(w, generator.sample(rng), d_star);
        if w > limit {
            return t;
        }
    }
    cap
}

/// Average run length over `reps` streams; stream `r` is keyed by
/// `(seed, "arl", r)`, so a fixed seed gives common random numbers across
/// limits.
pub fn estimate_arl<G: InControlGenerator + ?Sized>(
    generator: &G,
    d_star: f64,
    limit: f64,
    reps: usize,
    seed: u64,
    cap: usize,
) -> f64 {
    let lengths: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| run_length(generator, d_star, limit, &mut stream(seed, "arl", r as u64), cap))
        .collect();
    lengths.iter().sum::<usize>() as f64 / reps as f64
}

/// Settings for [`calibrate_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationOptions {
    pub reps: usize,
    pub seed: u64,
    pub search_range: (f64, f64),
    /// Runs longer than `cap_factor * target` are censored there.
    pub cap_factor: f64,
    /// Accepted relative error of the achieved ARL.
    pub tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { reps: 2000, seed: 0, search_range: (0.0, 50.0), cap_factor: 100.0, tolerance: 0.05 }
    }
}

/// A calibrated control limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub limit: f64,
    pub arl0: f64,
    pub target_arl0: f64,
    pub d_star: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Bisection for the limit whose in-control ARL matches `target_arl0`.
pub fn calibrate_limit<G: InControlGenerator + ?Sized>(
    generator: &G,
    d_star: f64,
    target_arl0: f64,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if !(target_arl0 >= 1.0) {
        return invalid(format!("target ARL0 must be at least 1, got {target_arl0}"));
    }
    if opts.reps == 0 {
        return invalid("calibration needs at least one replication");
    }
    let cap = ((opts.cap_factor * target_arl0).ceil() as usize).max(1000);
    let arl = |l: f64| estimate_arl(generator, d_star, l, opts.reps, opts.seed, cap);
    let done = |l: f64, a: f64| Calibration {
        limit: l,
        arl0: a,
        target_arl0,
        d_star,
        reps: opts.reps,
        seed: opts.seed,
    };
    let (mut lo, mut hi) = opts.search_range;
    let (mut a_lo, mut a_hi) = (arl(lo), arl(hi));
    let tol = opts.tolerance * target_arl0;
    if a_lo >= target_arl0 {
        if a_lo - target_arl0 <= tol {
            return Ok(done(lo, a_lo));
        }
        return Err(Error::Bracket { lo, hi, arl_lo: a_lo, arl_hi: a_hi, target: target_arl0 });
    }
    if a_hi < target_arl0 - tol {
        return Err(Error::Bracket { lo, hi, arl_lo: a_lo, arl_hi: a_hi, target: target_arl0 });
    }
    for _ in 0..60 {
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let a = arl(mid);
        if a < target_arl0 {
            lo = mid;
            a_lo = a;
        } else {
            hi = mid;
            a_hi = a;
        }
    }
    Ok(if (a_hi - target_arl0).abs() <= (target_arl0 - a_lo).abs() { done(hi, a_hi) } else { done(lo, a_lo) })
}

/// The fit used to score one period.
#[derive(Debug, Clone)]
pub struct PeriodFit {
    pub data: Arc<ProblemData>,
    pub path: Arc<FitPath>,
    /// Index of the scored period within `data`.
    pub period: usize,
}

/// How the model is (re)fitted as periods arrive.
pub trait FitProcedure: Sync {
    fn fit_for(&self, data: &ProblemData, t: usize) -> Result<PeriodFit>;
}

/// One fit of the whole tensor, reused for every period.
#[derive(Debug, Clone)]
pub struct Retrospective {
    data: Arc<ProblemData>,
    path: Arc<FitPath>,
}

impl Retrospective {
    pub fn new(data: &ProblemData, grid: &[f64], solver: &SolverConfig) -> Result<Self> {
        let path = fit_path(data, grid, solver)?;
        Ok(Self { data: Arc::new(data.clone()), path: Arc::new(path) })
    }

    pub fn from_path(data: &ProblemData, path: FitPath) -> Self {
        Self { data: Arc::new(data.clone()), path: Arc::new(path) }
    }

    pub fn path(&self) -> &FitPath {
        &self.path
    }
}

impl FitProcedure for Retrospective {
    fn fit_for(&self, data: &ProblemData, t: usize) -> Result<PeriodFit> {
        check_period(data, t)?;
        if data.dims() != self.data.dims() {
            return dim_err("retrospective fit was built for a different tensor");
        }
        Ok(PeriodFit { data: self.data.clone(), path: self.path.clone(), period: t })
    }
}

/// Refit on periods `0..=t` for every scored period.
#[derive(Debug, Clone)]
pub struct ExpandingWindow {
    pub grid: Vec<f64>,
    pub solver: SolverConfig,
    pub basis: BasisConfig,
}

/// The first `len` periods of `data`, with bases rebuilt for that length.
pub fn truncate_periods(data: &ProblemData, len: usize, basis: &BasisConfig) -> Result<ProblemData> {
    let y = data.y().leading_periods(len)?;
    let pop = data.pop().leading_periods(len)?;
    let b = basis_set(y.dims(), basis)?;
    ProblemData::new(y, pop, b)
}

impl FitProcedure for ExpandingWindow {
    fn fit_for(&self, data: &ProblemData, t: usize) -> Result<PeriodFit> {
        check_period(data, t)?;
        let sub = truncate_periods(data, t + 1, &self.basis)?;
        let path = fit_path(&sub, &self.grid, &self.solver)?;
        Ok(PeriodFit { data: Arc::new(sub), path: Arc::new(path), period: t })
    }
}

/// Outcome of monitoring a stream.
#[derive(Debug, Clone)]
pub struct ChartRun {
    pub alarm: Option<usize>,
    pub history: Vec<ChartRecord>,
    /// The fit at the alarm period, if any.
    pub alarm_fit: Option<PeriodFit>,
}

/// Process `periods` in order until the chart alarms.
pub fn run_chart(
    data: &ProblemData,
    procedure: &dyn FitProcedure,
    chart: &mut CusumChart,
    periods: Range<usize>,
    pearson: bool,
) -> Result<ChartRun> {
    for t in periods {
        let pf = procedure.fit_for(data, t);
        let values: Option<Vec<Option<f64>>> = pf.as_ref().ok().map(|pf| {
            (0..pf.path.len())
                .map(|k| pf.path.fit(k).and_then(|f| p_plus(f, &pf.data, pf.period, pearson).ok()))
                .collect()
        });
        if chart.observe(t, values.as_deref())? {
            return Ok(ChartRun { alarm: Some(t), history: chart.history.clone(), alarm_fit: pf.ok() });
        }
    }
    Ok(ChartRun { alarm: None, history: chart.history.clone(), alarm_fit: None })
}

/// Penalty grid settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_lambda: usize,
    pub min_ratio: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_lambda: 10, min_ratio: 1e-3 }
    }
}

/// Geometric grid below `lambda_max(data)`.
pub fn default_grid(data: &ProblemData, grid: &GridConfig, solver: &SolverConfig) -> Result<Vec<f64>> {
    let lmax = lambda_max(data, solver)?;
    geometric_grid(lmax.max(f64::MIN_POSITIVE), grid.n_lambda, grid.min_ratio)
}
