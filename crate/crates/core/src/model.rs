//! Poisson log-rate model `log r = Xθ_m + Zθ_h` with exposure offsets, its
//! penalized objective and gradients.

use crate::basis::BasisSet;
use crate::error::{dim_err, invalid, Error, Result};
use crate::tensor::{refold, Tensor3};

/// Linear predictors are clamped to `[-30, 30]` before exponentiation.
pub const DEFAULT_CLAMP: f64 = 30.0;

/// Observed counts, exposures and the bases they are modelled with.
#[derive(Debug, Clone)]
pub struct ProblemData {
    y: Tensor3,
    pop: Tensor3,
    basis: BasisSet,
}

impl ProblemData {
    pub fn new(y: Tensor3, pop: Tensor3, basis: BasisSet) -> Result<Self> {
        if y.dims() != pop.dims() {
            return dim_err(format!("counts {:?} vs population {:?}", y.dims(), pop.dims()));
        }
        if basis.dims() != y.dims() {
            return dim_err(format!("bases are for {:?}, data is {:?}", basis.dims(), y.dims()));
        }
        if let Some(p) = pop.as_slice().iter().position(|&v| v <= 0.0) {
            return invalid(format!("population entry {p} is not positive"));
        }
        if let Some(p) = y
            .as_slice()
            .iter()
            .position(|&v| v < 0.0 || (v - v.round()).abs() > 1e-9)
        {
            return invalid(format!("count entry {p} is not a nonnegative integer"));
        }
        Ok(Self { y, pop, basis })
    }

    pub fn y(&self) -> &Tensor3 {
        &self.y
    }

    pub fn pop(&self) -> &Tensor3 {
        &self.pop
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn dims(&self) -> [usize; 3] {
        self.y.dims()
    }

    pub fn y_vec(&self) -> &[f64] {
        self.y.as_slice()
    }

    pub fn n_vec(&self) -> &[f64] {
        self.pop.as_slice()
    }

    pub fn p(&self) -> usize {
        self.basis.smooth.ncols()
    }

    pub fn q(&self) -> usize {
        self.basis.hotspot.ncols()
    }
}

/// Coefficient vectors `θ_m` (length p) and `θ_h` (length q).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub theta_m: Vec<f64>,
    pub theta_h: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(data: &ProblemData) -> Self {
        Self { theta_m: vec![0.0; data.p()], theta_h: vec![0.0; data.q()] }
    }

    fn check(&self, data: &ProblemData) -> Result<()> {
        if self.theta_m.len() != data.p() || self.theta_h.len() != data.q() {
            return dim_err(format!(
                "params have lengths ({}, {}), bases need ({}, {})",
                self.theta_m.len(),
                self.theta_h.len(),
                data.p(),
                data.q()
            ));
        }
        Ok(())
    }
}

/// `Xθ_m + Zθ_h`, unclamped.
pub fn linear_predictor(data: &ProblemData, params: &ModelParams) -> Vec<f64> {
    let mut eta = data.basis.smooth.apply(&params.theta_m);
    let h = data.basis.hotspot.apply(&params.theta_h);
    for (e, v) in eta.iter_mut().zip(h) {
        *e += v;
    }
    eta
}

pub(crate) fn nll_from_eta(y: &[f64], n: &[f64], eta: &[f64], clamp: f64) -> f64 {
    y.iter()
        .zip(n)
        .zip(eta)
        .map(|((&y, &n), &e)| -y * e + n * e.clamp(-clamp, clamp).exp())
        .sum()
}

/// `γ_i = n_i exp(η_i)` with the clamp applied.
pub(crate) fn gamma_from_eta(n: &[f64], eta: &[f64], clamp: f64) -> Vec<f64> {
    n.iter().zip(eta).map(|(&n, &e)| n * e.clamp(-clamp, clamp).exp()).collect()
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("{what} is not finite")))
    }
}

/// `Σ_i [-y_i η_i + n_i exp(η_i)]`.
pub fn neg_log_likelihood(data: &ProblemData, params: &ModelParams) -> Result<f64> {
    params.check(data)?;
    let eta = linear_predictor(data, params);
    finite(nll_from_eta(data.y_vec(), data.n_vec(), &eta, DEFAULT_CLAMP), "negative log-likelihood")
}

/// Negative log-likelihood plus `λ‖θ_h‖₁`.
pub fn objective(data: &ProblemData, params: &ModelParams, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return invalid(format!("penalty must be nonnegative, got {lambda}"));
    }
    let l1: f64 = params.theta_h.iter().map(|v| v.abs()).sum();
    let pen = if l1 == 0.0 { 0.0 } else { lambda * l1 };
    finite(neg_log_likelihood(data, params)? + pen, "objective")
}

fn residual_gamma(data: &ProblemData, params: &ModelParams) -> Result<Vec<f64>> {
    params.check(data)?;
    let eta = linear_predictor(data, params);
    let g = gamma_from_eta(data.n_vec(), &eta, DEFAULT_CLAMP);
    let out: Vec<f64> = g.iter().zip(data.y_vec()).map(|(g, y)| g - y).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("fitted means are not finite".into()));
    }
    Ok(out)
}

/// `Xᵀ(γ - y)`.
pub fn grad_theta_m(data: &ProblemData, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(data.basis.smooth.apply_transpose(&residual_gamma(data, params)?))
}

/// `Zᵀ(γ - y)`.
pub fn grad_theta_h(data: &ProblemData, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(data.basis.hotspot.apply_transpose(&residual_gamma(data, params)?))
}

/// Estimated coefficients at one penalty with their tensor-shaped views.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub params: ModelParams,
    pub lambda: f64,
    /// Smooth log-rate `refold(Xθ_m)`.
    pub u_hat: Tensor3,
    /// Hot-spot log-rate `refold(Zθ_h)`.
    pub h_hat: Tensor3,
    /// `exp(u_hat + h_hat)`.
    pub r_hat: Tensor3,
    /// `pop ⊙ r_hat`.
    pub mu_hat_counts: Tensor3,
    pub objective_value: f64,
    pub converged: bool,
    pub stagnated: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Objective after each outer iteration, starting with the initial value.
    pub objective_trace: Vec<f64>,
}

impl ModelFit {
    /// Background mean counts `pop ⊙ exp(u_hat)`, i.e. the fit with `θ_h`
    /// forced to zero.
    pub fn background_mean(&self, data: &ProblemData) -> Tensor3 {
        let dims = self.u_hat.dims();
        let v = self
            .u_hat
            .as_slice()
            .iter()
            .zip(data.n_vec())
            .map(|(u, n)| n * u.clamp(-DEFAULT_CLAMP, DEFAULT_CLAMP).exp())
            .collect();
        refold(v, dims).expect("finite by clamping")
    }

    /// Number of nonzero hot-spot coefficients.
    pub fn hotspot_nonzeros(&self) -> usize {
        self.params.theta_h.iter().filter(|v| **v != 0.0).count()
    }
}

fn tensor_unchecked(dims: [usize; 3], v: Vec<f64>) -> Result<Tensor3> {
    refold(v, dims).map_err(|e| Error::Divergence(e.to_string()))
}

/// Assemble a [`ModelFit`] from coefficients. Convergence bookkeeping is left
/// for the caller to fill in.
pub fn fitted_tensors(data: &ProblemData, params: &ModelParams, lambda: f64) -> Result<ModelFit> {
    params.check(data)?;
    let dims = data.dims();
    let u = data.basis.smooth.apply(&params.theta_m);
    let h = data.basis.hotspot.apply(&params.theta_h);
    let r: Vec<f64> = u.iter().zip(&h).map(|(a, b)| (a + b).exp()).collect();
    let mu: Vec<f64> = r.iter().zip(data.n_vec()).map(|(r, n)| r * n).collect();
    let objective_value = objective(data, params, lambda)?;
    Ok(ModelFit {
        params: params.clone(),
        lambda,
        u_hat: tensor_unchecked(dims, u)?,
        h_hat: tensor_unchecked(dims, h)?,
        r_hat: tensor_unchecked(dims, r)?,
        mu_hat_counts: tensor_unchecked(dims, mu)?,
        objective_value,
        converged: false,
        stagnated: false,
        outer_iterations: 0,
        inner_iterations: 0,
        objective_trace: vec![objective_value],
    })
}
