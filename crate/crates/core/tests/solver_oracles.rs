mod common;

use common::oracles::*;
use common::*;
use proptest::prelude::*;
use tensor_hotspot::linalg::max_eigenvalue;
use tensor_hotspot::model::*;
use tensor_hotspot::solver::*;
use tensor_hotspot::tensor::{Matrix, Tensor3};

/// Exact minimizer of the separable hot-spot problem for identity `Z`.
fn separable_oracle(data: &ProblemData, theta_m: &[f64], lambda: f64) -> Vec<f64> {
    let xb = data.basis().smooth.apply(theta_m);
    data.y_vec()
        .iter()
        .zip(data.n_vec())
        .zip(&xb)
        .map(|((&y, &n), &x)| {
            let g0 = n * x.exp();
            if y - g0 > lambda {
                ((y - lambda) / g0).ln()
            } else if g0 - y > lambda {
                ((y + lambda) / g0).ln()
            } else {
                0.0
            }
        })
        .collect()
}

fn tight() -> SolverConfig {
    SolverConfig { max_outer: 2000, max_inner: 20000, outer_tol: 1e-15, inner_tol: 1e-13, ..Default::default() }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    max_abs_diff(a, b) / b.iter().map(|v| v.abs()).fold(1.0, f64::max)
}

#[test]
fn background_fit_matches_glm_oracle() {
    for seed in 0..5 {
        let data = spline_instance(seed, [5, 4, 6], 50.0);
        let want = glm_oracle(&data);
        let got = fit_background(&data, &SolverConfig::default()).unwrap();
        assert!(rel(&got.theta_m, &want) < 1e-6, "seed {seed}: {}", rel(&got.theta_m, &want));
        let lmax = lambda_max(&data, &SolverConfig::default()).unwrap();
        let f = fit(&data, lmax * 1.01, &SolverConfig::default()).unwrap();
        assert!(f.params.theta_h.iter().all(|&v| v == 0.0));
        assert!(rel(&f.params.theta_m, &want) < 1e-6, "{}", rel(&f.params.theta_m, &want));
    }
}

#[test]
fn fista_matches_separable_minimizer() {
    for seed in 0..6 {
        let data = spline_instance(seed, [4, 3, 5], 40.0);
        let mut g = rng(seed);
        let theta_m = fit_background(&data, &SolverConfig::default()).unwrap().theta_m;
        let lmax = lambda_max(&data, &SolverConfig::default()).unwrap();
        for frac in [0.05, 0.3, 0.8] {
            let lambda = frac * lmax;
            let start = random_vec(&mut g, data.q(), 0.2);
            let out = fista_solve(&data, &theta_m, &start, lambda, &tight()).unwrap();
            let want = separable_oracle(&data, &theta_m, lambda);
            assert!(max_abs_diff(&out.theta_h, &want) < 1e-6, "seed {seed} frac {frac}");
        }
    }
}

#[test]
fn zero_above_lambda_max() {
    let data = spline_instance(11, [4, 3, 6], 30.0);
    let cfg = SolverConfig::default();
    let (lmax, bg) = lambda_max_with_fit(&data, &cfg).unwrap();
    let zero = vec![0.0; data.q()];
    let above = fista_solve(&data, &bg.theta_m, &zero, lmax * 1.01, &cfg).unwrap();
    assert!(above.theta_h.iter().all(|&v| v == 0.0));
    let below = fista_solve(&data, &bg.theta_m, &zero, lmax * 0.9, &cfg).unwrap();
    assert!(below.theta_h.iter().any(|&v| v != 0.0));
}

#[test]
fn lipschitz_matches_power_iteration() {
    let data = random_basis_instance(5, [3, 3, 3], [2, 2, 2]);
    let p = random_params(&mut rng(5), &data, 0.2);
    let eta = linear_predictor(&data, &p);
    let w: Vec<f64> = eta.iter().zip(data.n_vec()).map(|(e, n)| n * e.exp()).collect();
    let z = data.basis().z_dense();
    let m = Matrix::from_fn(z.cols(), z.cols(), |a, b| (0..z.rows()).map(|i| z.get(i, a) * w[i] * z.get(i, b)).sum());
    let mut v = vec![1.0; m.rows()];
    let mut ev = 0.0;
    for _ in 0..5000 {
        let u = m.matvec(&v).unwrap();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        ev = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = u.iter().map(|x| x / norm).collect();
    }
    let l = lipschitz_constant(&data, &p);
    assert!((l - ev).abs() < 1e-8 * ev, "{l} vs {ev}");
    assert!((max_eigenvalue(&m) - ev).abs() < 1e-8 * ev);
}

#[test]
fn offset_absorption() {
    let data = spline_instance(21, [4, 4, 6], 40.0);
    let cfg = tight();
    let lambda = 0.2 * lambda_max(&data, &cfg).unwrap();
    let a = fit(&data, lambda, &cfg).unwrap();
    let scaled = ProblemData::new(data.y().clone(), data.pop().map(|v| v * 7.5), data.basis().clone()).unwrap();
    let b = fit(&scaled, lambda, &cfg).unwrap();
    assert!(rel(b.mu_hat_counts.as_slice(), a.mu_hat_counts.as_slice()) < 1e-6);
}

#[test]
fn deterministic() {
    let data = spline_instance(8, [5, 3, 7], 25.0);
    let cfg = SolverConfig::default();
    let l = 0.1 * lambda_max(&data, &cfg).unwrap();
    let a = fit(&data, l, &cfg).unwrap();
    let b = fit(&data, l, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn saturated_cell_at_zero_penalty() {
    let y = Tensor3::new([1, 1, 1], vec![7.0]).unwrap();
    let n = Tensor3::new([1, 1, 1], vec![2.0]).unwrap();
    let data = ProblemData::new(y, n, tensor_hotspot::basis::default_basis_set([1, 1, 1]).unwrap()).unwrap();
    let out = fista_solve(&data, &[0.0], &[0.0], 0.0, &tight()).unwrap();
    assert!((2.0 * out.theta_h[0].exp() - 7.0).abs() < 1e-6, "{out:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prox_fixed_point(seed in any::<u64>(), frac in 0.02f64..0.9) {
        let data = spline_instance(seed, [3, 3, 5], 30.0);
        let cfg = tight();
        let (lmax, bg) = lambda_max_with_fit(&data, &cfg).unwrap();
        let lambda = frac * lmax;
        let out = fista_solve(&data, &bg.theta_m, &vec![0.0; data.q()], lambda, &cfg).unwrap();
        let p = ModelParams { theta_m: bg.theta_m.clone(), theta_h: out.theta_h.clone() };
        let g = grad_theta_h(&data, &p).unwrap();
        let l = lipschitz_constant(&data, &p);
        for k in 0..data.q() {
            let fp = soft_threshold(out.theta_h[k] - g[k] / l, lambda / l);
            prop_assert!((fp - out.theta_h[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_nonincreasing(seed in any::<u64>(), frac in 0.01f64..1.0) {
        let data = spline_instance(seed, [4, 3, 6], 20.0);
        let cfg = SolverConfig::default();
        let lambda = frac * lambda_max(&data, &cfg).unwrap();
        let f = fit(&data, lambda, &cfg).unwrap();
        for w in f.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-8);
        }
        let direct = objective(&data, &f.params, lambda).unwrap();
        prop_assert!((direct - f.objective_value).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn fista_never_increases(seed in any::<u64>(), frac in 0.0f64..1.2) {
        let data = random_basis_instance(seed, [3, 2, 3], [2, 2, 2]);
        let mut g = rng(seed);
        let theta_m = random_vec(&mut g, data.p(), 0.3);
        let start = random_vec(&mut g, data.q(), 0.3);
        let lambda = frac * 10.0;
        let out = fista_solve(&data, &theta_m, &start, lambda, &SolverConfig::default()).unwrap();
        let before = objective(&data, &ModelParams { theta_m: theta_m.clone(), theta_h: start }, lambda).unwrap();
        let after = objective(&data, &ModelParams { theta_m, theta_h: out.theta_h }, lambda).unwrap();
        prop_assert!(after <= before + 1e-8);
    }
}
