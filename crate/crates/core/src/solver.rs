//! Alternating estimator: damped IRLS for the background coefficients and
//! FISTA for the sparse hot-spot coefficients, plus penalty paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{max_eigenvalue, spd_solve};
use crate::model::{fitted_tensors, gamma_from_eta, nll_from_eta, ModelFit, ModelParams, ProblemData};

/// Stopping rules and numerical safeguards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative objective change that ends the outer loop.
    pub outer_tol: f64,
    /// Relative `θ_h` change that ends a FISTA solve.
    pub inner_tol: f64,
    pub ridge: f64,
    pub step_halving_max: usize,
    pub predictor_clamp: f64,
    /// Start each penalty on a path from the previous solution.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 50,
            max_inner: 200,
            outer_tol: 1e-6,
            inner_tol: 1e-8,
            ridge: 1e-8,
            step_halving_max: 20,
            predictor_clamp: 30.0,
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_outer > 0
            && self.max_inner > 0
            && self.outer_tol > 0.0
            && self.outer_tol < 1.0
            && self.inner_tol > 0.0
            && self.inner_tol < 1.0
            && self.ridge >= 0.0
            && self.predictor_clamp > 0.0;
        if ok {
            Ok(())
        } else {
            invalid(format!("solver settings out of range: {self:?}"))
        }
    }
}

/// `S(x, a)`.
#[inline]
pub fn soft_threshold(x: f64, a: f64) -> f64 {
    if x >= a {
        x - a
    } else if x <= -a {
        x + a
    } else {
        0.0
    }
}

/// Next FISTA momentum weight.
#[inline]
pub fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn penalty(lambda: f64, v: &[f64]) -> f64 {
    let s = l1(v);
    if s == 0.0 {
        0.0
    } else {
        lambda * s
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Undamped IRLS update `θ_m + (XᵀWX + ridge I)⁻¹ Xᵀ(y - γ)`, the
/// weighted least-squares fit to the working response `Xθ_m + W⁻¹(y - γ)`.
pub fn irls_update(data: &ProblemData, params: &ModelParams, config: &SolverConfig) -> Result<Vec<f64>> {
    let x = &data.basis().smooth;
    let xb = x.apply(&params.theta_m);
    let zb = data.basis().hotspot.apply(&params.theta_h);
    irls_update_raw(data, &params.theta_m, &xb, &zb, config)
}

fn irls_update_raw(data: &ProblemData, theta_m: &[f64], xb: &[f64], zb: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    let x = &data.basis().smooth;
    let eta = add(xb, zb);
    let w = gamma_from_eta(data.n_vec(), &eta, config.predictor_clamp);
    let resid: Vec<f64> = data.y_vec().iter().zip(&w).map(|(y, w)| y - w).collect();
    let rhs = x.apply_transpose(&resid);
    let gram = x.weighted_gram(&w);
    let delta = spd_solve(&gram, &rhs, config.ridge)
        .ok_or_else(|| Error::Divergence("IRLS normal equations could not be solved".into()))?;
    Ok(theta_m.iter().zip(&delta).map(|(a, b)| a + b).collect())
}

/// Result of one damped IRLS step.
#[derive(Debug, Clone)]
pub struct IrlsStep {
    pub theta_m: Vec<f64>,
    /// Accepted fraction of the full Newton step (0 when stagnated).
    pub step: f64,
    pub stagnated: bool,
}

/// One IRLS step for `θ_m` with `θ_h` fixed, halved toward the old value
/// until the objective does not increase.
pub fn irls_step(data: &ProblemData, params: &ModelParams, config: &SolverConfig) -> Result<IrlsStep> {
    let xb = data.basis().smooth.apply(&params.theta_m);
    let zb = data.basis().hotspot.apply(&params.theta_h);
    let (theta_m, _, step) = damped_irls(data, &params.theta_m, &xb, &zb, config)?;
    Ok(IrlsStep { theta_m, step, stagnated: step == 0.0 })
}

fn damped_irls(
    data: &ProblemData,
    theta_m: &[f64],
    xb: &[f64],
    zb: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let target = irls_update_raw(data, theta_m, xb, zb, config)?;
    let (y, n, c) = (data.y_vec(), data.n_vec(), config.predictor_clamp);
    let f_old = nll_from_eta(y, n, &add(xb, zb), c);
    let dir: Vec<f64> = target.iter().zip(theta_m).map(|(a, b)| a - b).collect();
    let xdir = data.basis().smooth.apply(&dir);
    let mut s = 1.0;
    for _ in 0..=config.step_halving_max {
        let xs: Vec<f64> = xb.iter().zip(&xdir).map(|(a, d)| a + s * d).collect();
        let f = nll_from_eta(y, n, &add(&xs, zb), c);
        if f.is_finite() && f <= f_old {
            let th = theta_m.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            return Ok((th, xs, s));
        }
        s *= 0.5;
    }
    Ok((theta_m.to_vec(), xb.to_vec(), 0.0))
}

/// Largest eigenvalue of `ZᵀWZ` at the current iterate. Closed form
/// `max_i w_i` when `Z` is the identity.
pub fn lipschitz_constant(data: &ProblemData, params: &ModelParams) -> f64 {
    let eta = crate::model::linear_predictor(data, params);
    let w = gamma_from_eta(data.n_vec(), &eta, crate::model::DEFAULT_CLAMP);
    lipschitz_from_weights(data, &w)
}

fn lipschitz_from_weights(data: &ProblemData, w: &[f64]) -> f64 {
    let z = &data.basis().hotspot;
    if z.is_identity() {
        w.iter().copied().fold(0.0, f64::max)
    } else {
        max_eigenvalue(&z.weighted_gram(w))
    }
}

/// Output of [`fista_solve`].
#[derive(Debug, Clone)]
pub struct FistaOutcome {
    pub theta_h: Vec<f64>,
    pub iterations: usize,
    /// Step constant actually used.
    pub lipschitz: f64,
    pub converged: bool,
}

/// FISTA on `θ_h` with `θ_m` fixed.
///
/// `L` starts at the curvature bound for the start point and is doubled
/// whenever the quadratic upper model fails. Momentum restarts whenever the
/// extrapolated point moves against the last step. If the run ends above the
/// starting objective, `L` is doubled and the solve repeated from the start
/// point.
pub fn fista_solve(
    data: &ProblemData,
    theta_m: &[f64],
    theta_h_start: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<FistaOutcome> {
    let xb = data.basis().smooth.apply(theta_m);
    fista_raw(data, &xb, theta_h_start, lambda, config)
}

fn fista_raw(
    data: &ProblemData,
    xb: &[f64],
    start: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<FistaOutcome> {
    if lambda.is_nan() || lambda < 0.0 {
        return invalid(format!("penalty must be nonnegative, got {lambda}"));
    }
    let z = &data.basis().hotspot;
    let (y, n, c) = (data.y_vec(), data.n_vec(), config.predictor_clamp);
    let smooth_at = |theta: &[f64]| -> (f64, Vec<f64>) {
        let eta = add(xb, &z.apply(theta));
        let g = gamma_from_eta(n, &eta, c);
        (nll_from_eta(y, n, &eta, c), g)
    };
    let (g0, w0) = smooth_at(start);
    let f_start = g0 + penalty(lambda, start);
    let mut lip = lipschitz_from_weights(data, &w0);
    if !(lip > 0.0) || !lip.is_finite() {
        lip = 1.0;
    }
    let mut total = 0;
    for _attempt in 0..12 {
        let mut x_prev = start.to_vec();
        let mut alpha = start.to_vec();
        let mut t = 1.0;
        let mut converged = false;
        for s in 1..=config.max_inner {
            total += 1;
            let (g_alpha, g) = smooth_at(&alpha);
            let resid: Vec<f64> = g.iter().zip(y).map(|(g, y)| g - y).collect();
            let grad = z.apply_transpose(&resid);
            let x = loop {
                let thr = lambda / lip;
                let x: Vec<f64> = alpha
                    .iter()
                    .zip(&grad)
                    .map(|(a, g)| soft_threshold(a - g / lip, thr))
                    .collect();
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence(format!("FISTA iterate not finite at iteration {s}")));
                }
                let (g_x, _) = smooth_at(&x);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for i in 0..x.len() {
                    let d = x[i] - alpha[i];
                    lin += grad[i] * d;
                    sq += d * d;
                }
                let bound = g_alpha + lin + 0.5 * lip * sq;
                if g_x <= bound + 1e-12 * bound.abs().max(1.0) || lip > 1e300 {
                    break x;
                }
                lip *= 2.0;
            };
            let against: f64 = alpha
                .iter()
                .zip(&x)
                .zip(&x_prev)
                .map(|((a, x), p)| (a - x) * (x - p))
                .sum();
            let mut t_next = next_momentum(t);
            if against > 0.0 {
                t = 1.0;
                t_next = 1.0;
            }
            let beta = (t - 1.0) / t_next;
            let mut diff2 = 0.0;
            let mut prev2 = 0.0;
            for i in 0..x.len() {
                let d = x[i] - x_prev[i];
                diff2 += d * d;
                prev2 += x_prev[i] * x_prev[i];
                alpha[i] = x[i] + beta * d;
            }
            x_prev = x;
            t = t_next;
            if diff2.sqrt() <= config.inner_tol * prev2.sqrt().max(1.0) {
                converged = true;
                break;
            }
        }
        let (g_end, _) = smooth_at(&x_prev);
        let f_end = g_end + penalty(lambda, &x_prev);
        if f_end.is_finite() && f_end <= f_start {
            return Ok(FistaOutcome { theta_h: x_prev, iterations: total, lipschitz: lip, converged });
        }
        lip *= 2.0;
    }
    Ok(FistaOutcome { theta_h: start.to_vec(), iterations: total, lipschitz: lip, converged: false })
}

/// Least-squares projection of `log((y + 0.5) / n)` onto the columns of `X`.
pub fn initial_theta_m(data: &ProblemData, config: &SolverConfig) -> Result<Vec<f64>> {
    let x = &data.basis().smooth;
    let target: Vec<f64> = data
        .y_vec()
        .iter()
        .zip(data.n_vec())
        .map(|(y, n)| ((y + 0.5) / n).ln())
        .collect();
    let gram = x.weighted_gram(&vec![1.0; target.len()]);
    spd_solve(&gram, &x.apply_transpose(&target), config.ridge.max(1e-12))
        .ok_or_else(|| Error::Divergence("initial projection failed".into()))
}

/// Fit at one penalty from the default initialization.
pub fn fit(data: &ProblemData, lambda: f64, config: &SolverConfig) -> Result<ModelFit> {
    fit_from(data, lambda, config, None)
}

/// Fit at one penalty, optionally warm-started.
pub fn fit_from(
    data: &ProblemData,
    lambda: f64,
    config: &SolverConfig,
    start: Option<&ModelParams>,
) -> Result<ModelFit> {
    config.validate()?;
    if lambda.is_nan() || lambda < 0.0 {
        return invalid(format!("penalty must be nonnegative, got {lambda}"));
    }
    let mut params = match start {
        Some(p) => p.clone(),
        None => ModelParams { theta_m: initial_theta_m(data, config)?, theta_h: vec![0.0; data.q()] },
    };
    let (y, n, c) = (data.y_vec(), data.n_vec(), config.predictor_clamp);
    let mut xb = data.basis().smooth.apply(&params.theta_m);
    let mut zb = data.basis().hotspot.apply(&params.theta_h);
    let mut f = nll_from_eta(y, n, &add(&xb, &zb), c) + penalty(lambda, &params.theta_h);
    if !f.is_finite() {
        return Err(Error::Divergence("objective not finite at the start point".into()));
    }
    let mut trace = vec![f];
    let mut converged = false;
    let mut stagnated = false;
    let mut inner_total = 0;
    let mut outer = 0;
    while outer < config.max_outer {
        outer += 1;
        let (tm, xs, step) = damped_irls(data, &params.theta_m, &xb, &zb, config)?;
        params.theta_m = tm;
        xb = xs;
        let fo = fista_raw(data, &xb, &params.theta_h, lambda, config)?;
        inner_total += fo.iterations;
        params.theta_h = fo.theta_h;
        zb = data.basis().hotspot.apply(&params.theta_h);
        let f_new = nll_from_eta(y, n, &add(&xb, &zb), c) + penalty(lambda, &params.theta_h);
        if !f_new.is_finite() {
            return Err(Error::Divergence(format!("objective not finite at outer iteration {outer}")));
        }
        trace.push(f_new);
        let change = (f - f_new).abs();
        f = f_new;
        let scale = if params.theta_h.iter().all(|v| *v == 0.0) { BACKGROUND_TOL_FACTOR } else { 1.0 };
        if change <= config.outer_tol * scale * f.abs().max(1.0) {
            converged = true;
            break;
        }
        if step == 0.0 && change == 0.0 {
            stagnated = true;
            break;
        }
    }
    let mut out = fitted_tensors(data, &params, lambda)?;
    out.objective_value = f;
    out.converged = converged;
    out.stagnated = stagnated;
    out.outer_iterations = outer;
    out.inner_iterations = inner_total;
    out.objective_trace = trace;
    Ok(out)
}

/// Outer tolerance multiplier while the hot-spot block is exactly zero and
/// the problem reduces to the Poisson GLM.
const BACKGROUND_TOL_FACTOR: f64 = 1e-3;

/// Poisson GLM fit with `θ_h = 0`: damped IRLS on `θ_m` alone.
pub fn fit_background(data: &ProblemData, config: &SolverConfig) -> Result<ModelParams> {
    config.validate()?;
    let (y, n, c) = (data.y_vec(), data.n_vec(), config.predictor_clamp);
    let zb = vec![0.0; data.y_vec().len()];
    let mut theta = initial_theta_m(data, config)?;
    let mut xb = data.basis().smooth.apply(&theta);
    let mut f = nll_from_eta(y, n, &xb, c);
    for _ in 0..config.max_outer {
        let (tm, xs, step) = damped_irls(data, &theta, &xb, &zb, config)?;
        theta = tm;
        xb = xs;
        let f_new = nll_from_eta(y, n, &xb, c);
        let change = (f - f_new).abs();
        f = f_new;
        if step == 0.0 || change <= config.outer_tol * BACKGROUND_TOL_FACTOR * f.abs().max(1.0) {
            break;
        }
    }
    Ok(ModelParams { theta_m: theta, theta_h: vec![0.0; data.q()] })
}

/// Smallest penalty at which `θ_h = 0` is optimal given the background fit:
/// `‖Zᵀ(γ⁰ - y)‖∞`.
pub fn lambda_max(data: &ProblemData, config: &SolverConfig) -> Result<f64> {
    Ok(lambda_max_with_fit(data, config)?.0)
}

/// [`lambda_max`] together with the background fit it was computed at.
pub fn lambda_max_with_fit(data: &ProblemData, config: &SolverConfig) -> Result<(f64, ModelParams)> {
    let bg = fit_background(data, config)?;
    let eta = data.basis().smooth.apply(&bg.theta_m);
    let g = gamma_from_eta(data.n_vec(), &eta, config.predictor_clamp);
    let r: Vec<f64> = g.iter().zip(data.y_vec()).map(|(g, y)| g - y).collect();
    let grad = data.basis().hotspot.apply_transpose(&r);
    Ok((grad.iter().map(|v| v.abs()).fold(0.0, f64::max), bg))
}

/// `count` penalties from `lambda_max` down to `lambda_max * min_ratio`,
/// equally spaced on the log scale.
pub fn geometric_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return invalid(format!("lambda_max must be positive, got {lambda_max}"));
    }
    if count == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return invalid(format!("bad grid: {count} points, ratio {min_ratio}"));
    }
    if count == 1 {
        return Ok(vec![lambda_max]);
    }
    Ok((0..count)
        .map(|k| lambda_max * min_ratio.powf(k as f64 / (count - 1) as f64))
        .collect())
}

/// Fits along a descending penalty grid.
#[derive(Debug, Clone)]
pub struct FitPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<std::result::Result<ModelFit, Error>>,
}

impl FitPath {
    pub fn fit(&self, k: usize) -> Option<&ModelFit> {
        self.fits.get(k).and_then(|r| r.as_ref().ok())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("penalty grid must be positive and strictly descending");
    }
    Ok(())
}

/// Fit every penalty on `grid`. With warm starts each fit begins at the
/// previous solution; otherwise fits start from `start` (or the default
/// initialization) and run in parallel.
pub fn fit_path(data: &ProblemData, grid: &[f64], config: &SolverConfig) -> Result<FitPath> {
    fit_path_from(data, grid, config, None)
}

pub fn fit_path_from(
    data: &ProblemData,
    grid: &[f64],
    config: &SolverConfig,
    start: Option<&ModelParams>,
) -> Result<FitPath> {
    check_grid(grid)?;
    config.validate()?;
    let fits = if config.warm_start {
        let mut out = Vec::with_capacity(grid.len());
        let mut prev = start.cloned();
        for &lam in grid {
            let r = fit_from(data, lam, config, prev.as_ref());
            if let Ok(f) = &r {
                prev = Some(f.params.clone());
            }
            out.push(r);
        }
        out
    } else {
        grid.par_iter().map(|&lam| fit_from(data, lam, config, start)).collect()
    };
    Ok(FitPath { lambdas: grid.to_vec(), fits })
}
