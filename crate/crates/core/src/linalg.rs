//! Thin wrappers over faer for the two dense kernels the solver needs.

use faer::prelude::*;
use faer::{Mat, Side};

use crate::tensor::Matrix;

fn to_faer(a: &Matrix) -> Mat<f64> {
    Mat::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
}

/// Solve `(A + ridge I) x = b` for symmetric positive definite `A`. When the
/// factorization fails the ridge is raised tenfold, up to eight times.
pub fn spd_solve(a: &Matrix, b: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max).max(1.0);
    let mut r = ridge;
    for _ in 0..9 {
        let mut m = to_faer(a);
        for i in 0..n {
            m[(i, i)] += r;
        }
        if let Ok(llt) = m.llt(Side::Lower) {
            let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
            let x = llt.solve(&rhs);
            let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
            if out.iter().all(|v| v.is_finite()) {
                return Some(out);
            }
        }
        r = if r > 0.0 { r * 10.0 } else { 1e-12 * scale };
    }
    None
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &Matrix) -> f64 {
    let m = to_faer(a);
    match m.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev.last().copied().unwrap_or(0.0),
        Err(_) => (0..a.rows()).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::new(2, 2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let x = spd_solve(&a, &[1.0, 2.0], 0.0).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_gets_ridge() {
        let a = Matrix::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(spd_solve(&a, &[1.0, 1.0], 0.0).is_some());
    }

    #[test]
    fn eigenvalue() {
        let a = Matrix::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((max_eigenvalue(&a) - 3.0).abs() < 1e-12);
    }
}
