#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use tensor_hotspot::basis::{bspline_basis, BasisSet};
use tensor_hotspot::model::{ModelParams, ProblemData};
use tensor_hotspot::tensor::{Matrix, Tensor3};

pub mod oracles;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_tensor(r: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| r.random_range(-1.0..1.0))
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

/// Poisson counts around `n * exp(eta)` with a spline smooth basis and an
/// identity hot-spot basis.
pub fn spline_instance(seed: u64, dims: [usize; 3], level: f64) -> ProblemData {
    let mut r = rng(seed);
    let smooth = [0, 1, 2].map(|m| {
        let n = dims[m];
        if n < 4 {
            Matrix::identity(n)
        } else {
            bspline_basis(n, &[1.0, 25.5, 50.0], 3.min(n - 1)).unwrap()
        }
    });
    let basis = BasisSet::new(smooth, [0, 1, 2].map(|m| Matrix::identity(dims[m]))).unwrap();
    poisson_instance(&mut r, dims, basis, level)
}

/// Random dense (not necessarily spline) bases.
pub fn random_basis_instance(seed: u64, dims: [usize; 3], cols: [usize; 3]) -> ProblemData {
    let mut r = rng(seed);
    let smooth = [0, 1, 2].map(|m| random_matrix(&mut r, dims[m], cols[m]).clone());
    let hot = [0, 1, 2].map(|m| random_matrix(&mut r, dims[m], dims[m]));
    let basis = BasisSet::new(smooth, hot).unwrap();
    poisson_instance(&mut r, dims, basis, 3.0)
}

fn poisson_instance(r: &mut ChaCha8Rng, dims: [usize; 3], basis: BasisSet, level: f64) -> ProblemData {
    let pop = Tensor3::from_fn(dims, |_, _, _| r.random_range(0.5..2.0) * level);
    let y = Tensor3::from_fn(dims, |i, j, k| {
        let mean = pop.get(i, j, k) * 0.2 * (1.0 + 0.3 * ((i + 2 * j + k) as f64).sin());
        Poisson::new(mean).unwrap().sample(r).floor()
    });
    ProblemData::new(y, pop, basis).unwrap()
}

pub fn random_params(r: &mut ChaCha8Rng, data: &ProblemData, scale: f64) -> ModelParams {
    ModelParams { theta_m: random_vec(r, data.p(), scale), theta_h: random_vec(r, data.q(), scale) }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
