//! Independent reference implementations.

use super::max_abs_diff;
use tensor_hotspot::model::ProblemData;
use tensor_hotspot::tensor::{Matrix, Tensor3};

pub fn kron_oracle(a: &Matrix, b: &Matrix) -> Matrix {
    let (rb, cb) = (b.rows(), b.cols());
    let mut out = Matrix::zeros(a.rows() * rb, a.cols() * cb);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            for k in 0..rb {
                for l in 0..cb {
                    out.set(i * rb + k, j * cb + l, a.get(i, j) * b.get(k, l));
                }
            }
        }
    }
    out
}

pub fn mode_oracle(t: &Tensor3, m: &Matrix, mode: usize) -> Tensor3 {
    let mut dims = t.dims();
    dims[mode] = m.rows();
    Tensor3::from_fn(dims, |a, b, c| {
        let idx = [a, b, c];
        (0..t.dims()[mode])
            .map(|s| {
                let mut src = idx;
                src[mode] = s;
                m.get(idx[mode], s) * t.get(src[0], src[1], src[2])
            })
            .sum()
    })
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| {
        let mut r = a.row(i).to_vec();
        r.push(b[i]);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Poisson regression with offset `log n` by plain Newton with halving.
pub fn glm_oracle(data: &ProblemData) -> Vec<f64> {
    let x = data.basis().x_dense();
    let (y, n) = (data.y_vec(), data.n_vec());
    let nll = |th: &[f64]| -> f64 {
        let eta = x.matvec(th).unwrap();
        eta.iter().zip(y).zip(n).map(|((e, y), n)| n * e.exp() - y * e).sum()
    };
    let c = (y.iter().sum::<f64>() / n.iter().sum::<f64>()).ln();
    let mut th = vec![c; x.cols()];
    for _ in 0..200 {
        let eta = x.matvec(&th).unwrap();
        let mu: Vec<f64> = eta.iter().zip(n).map(|(e, n)| n * e.exp()).collect();
        let grad: Vec<f64> = (0..x.cols()).map(|j| (0..x.rows()).map(|i| x.get(i, j) * (mu[i] - y[i])).sum()).collect();
        let hess = Matrix::from_fn(x.cols(), x.cols(), |a, b| (0..x.rows()).map(|i| x.get(i, a) * mu[i] * x.get(i, b)).sum());
        let step = dense_solve(&hess, &grad);
        let f0 = nll(&th);
        let mut s = 1.0;
        loop {
            let cand: Vec<f64> = th.iter().zip(&step).map(|(t, d)| t - s * d).collect();
            if nll(&cand) <= f0 || s < 1e-10 {
                th = cand;
                break;
            }
            s *= 0.5;
        }
        if step.iter().map(|v| v.abs()).fold(0.0, f64::max) * s < 1e-13 {
            break;
        }
    }
    th
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
    max_abs_diff(got, want) / scale
}

/// Textbook Cox–de Boor recursion on the clamped knot vector, with the last
/// function taken as 1 at the right end point.
pub fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 1 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = t[i + k - 1] - t[i];
    if d1 > 0.0 {
        v += (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x);
    }
    let d2 = t[i + k] - t[i + 1];
    if d2 > 0.0 {
        v += (t[i + k] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x);
    }
    v
}

pub fn bspline_oracle(n: usize, knots: &[f64], order: usize) -> Matrix {
    let (lo, hi) = (knots[0], *knots.last().unwrap());
    let mut t = vec![lo; order - 1];
    t.extend_from_slice(knots);
    t.extend(vec![hi; order - 1]);
    let cols = knots.len() + order - 2;
    Matrix::from_fn(n, cols, |p, c| {
        let x = lo + (hi - lo) * p as f64 / (n - 1) as f64;
        if x >= hi {
            return if c == cols - 1 { 1.0 } else { 0.0 };
        }
        cox_de_boor(&t, c, order, x)
    })
}
