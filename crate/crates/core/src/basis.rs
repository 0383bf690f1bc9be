//! Basis matrices: clamped B-splines for the smooth background, identities
//! for hot-spots, and the Kronecker-structured design operator built from
//! three factor matrices.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, invalid, Result};
use crate::tensor::{kron, mode_product_raw, Matrix};

/// Knot range every mode's grid is rescaled onto by default.
pub const KNOT_RANGE: (f64, f64) = (1.0, 50.0);

/// B-spline basis matrix on the points `1..=n_points` rescaled linearly onto
/// `[knots[0], knots[last]]`.
///
/// `order` counts polynomial degree plus one (1 = piecewise constant,
/// 4 = cubic). The endpoint knots are repeated `order - 1` times, which gives
/// `knots.len() + order - 2` columns.
pub fn bspline_basis(n_points: usize, knots: &[f64], order: usize) -> Result<Matrix> {
    if n_points < 2 {
        return invalid(format!("need at least 2 evaluation points, got {n_points}"));
    }
    if order == 0 {
        return invalid("spline order must be at least 1");
    }
    if knots.len() < 2 {
        return invalid(format!(
            "fewer than order+1 effective knots: {} knots at order {order}",
            knots.len()
        ));
    }
    if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("knots must be finite and strictly increasing");
    }
    let deg = order - 1;
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let mut t = Vec::with_capacity(knots.len() + 2 * deg);
    t.extend(std::iter::repeat_n(lo, deg));
    t.extend_from_slice(knots);
    t.extend(std::iter::repeat_n(hi, deg));
    let ncols = knots.len() + order - 2;
    let last_span = deg + knots.len() - 2;

    let mut out = Matrix::zeros(n_points, ncols);
    let mut n = vec![0.0; order];
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    for p in 0..n_points {
        let x = if p + 1 == n_points { hi } else { (lo + (hi - lo) * p as f64 / (n_points - 1) as f64).min(hi) };
        let span = if x >= hi {
            last_span
        } else {
            // largest s with t[s] <= x, restricted to real spans
            let mut s = deg;
            while s < last_span && t[s + 1] <= x {
                s += 1;
            }
            s
        };
        n[0] = 1.0;
        for j in 1..=deg {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        for (r, &v) in n.iter().enumerate() {
            out.set(p, span - deg + r, v);
        }
    }
    Ok(out)
}

/// `n x n` identity.
pub fn identity_basis(n: usize) -> Matrix {
    Matrix::identity(n)
}

/// `count` equally spaced knots over `range`.
pub fn equally_spaced_knots(count: usize, range: (f64, f64)) -> Vec<f64> {
    (0..count)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Linear operator `F1 ⊗ F2 ⊗ F3` kept in factored form.
#[derive(Debug, Clone)]
pub struct KronBasis {
    factors: [Matrix; 3],
    transposed: [Matrix; 3],
    nonzeros: [Vec<Vec<(usize, f64)>>; 3],
    identity: bool,
}

impl KronBasis {
    pub fn new(factors: [Matrix; 3]) -> Self {
        let transposed = [factors[0].transpose(), factors[1].transpose(), factors[2].transpose()];
        let nonzeros = [sparse_rows(&factors[0]), sparse_rows(&factors[1]), sparse_rows(&factors[2])];
        let identity = factors.iter().all(Matrix::is_identity);
        Self { factors, transposed, nonzeros, identity }
    }

    pub fn identity(dims: [usize; 3]) -> Self {
        Self::new(dims.map(Matrix::identity))
    }

    pub fn factors(&self) -> &[Matrix; 3] {
        &self.factors
    }

    pub fn row_dims(&self) -> [usize; 3] {
        [self.factors[0].rows(), self.factors[1].rows(), self.factors[2].rows()]
    }

    pub fn col_dims(&self) -> [usize; 3] {
        [self.factors[0].cols(), self.factors[1].cols(), self.factors[2].cols()]
    }

    pub fn nrows(&self) -> usize {
        self.row_dims().iter().product()
    }

    pub fn ncols(&self) -> usize {
        self.col_dims().iter().product()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `B θ`.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.ncols(), "coefficient length");
        if self.identity {
            return theta.to_vec();
        }
        let mut dims = self.col_dims();
        let mut buf = theta.to_vec();
        for mode in 0..3 {
            let f = &self.factors[mode];
            buf = mode_product_raw(&buf, dims, f.as_slice(), f.rows(), mode);
            dims[mode] = f.rows();
        }
        buf
    }

    /// `Bᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.nrows(), "vector length");
        if self.identity {
            return v.to_vec();
        }
        let mut dims = self.row_dims();
        let mut buf = v.to_vec();
        for mode in 0..3 {
            let f = &self.transposed[mode];
            buf = mode_product_raw(&buf, dims, f.as_slice(), f.rows(), mode);
            dims[mode] = f.rows();
        }
        buf
    }

    /// `Bᵀ diag(w) B`, contracting one mode at a time over the nonzeros of
    /// each factor row.
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        let [n1, n2, n3] = self.row_dims();
        let [p1, p2, p3] = self.col_dims();
        assert_eq!(w.len(), n1 * n2 * n3, "weight length");
        let q3 = p3 * p3;
        let mut t1 = vec![0.0; n1 * n2 * q3];
        for ij in 0..n1 * n2 {
            let dst = &mut t1[ij * q3..(ij + 1) * q3];
            for k in 0..n3 {
                let wk = w[ij * n3 + k];
                if wk == 0.0 {
                    continue;
                }
                for &(c, bc) in &self.nonzeros[2][k] {
                    for &(d, bd) in &self.nonzeros[2][k] {
                        dst[c * p3 + d] += wk * bc * bd;
                    }
                }
            }
        }
        let q23 = p2 * p2 * q3;
        let mut t2 = vec![0.0; n1 * q23];
        for i in 0..n1 {
            for j in 0..n2 {
                let src = &t1[(i * n2 + j) * q3..(i * n2 + j + 1) * q3];
                for &(b, bb) in &self.nonzeros[1][j] {
                    for &(e, be) in &self.nonzeros[1][j] {
                        let coef = bb * be;
                        let off = i * q23 + (b * p2 + e) * q3;
                        for (d, s) in t2[off..off + q3].iter_mut().zip(src) {
                            *d += coef * s;
                        }
                    }
                }
            }
        }
        let mut g = vec![0.0; p1 * p1 * q23];
        for i in 0..n1 {
            let src = &t2[i * q23..(i + 1) * q23];
            for &(a, ba) in &self.nonzeros[0][i] {
                for &(f, bf) in &self.nonzeros[0][i] {
                    let coef = ba * bf;
                    let off = (a * p1 + f) * q23;
                    for (d, s) in g[off..off + q23].iter_mut().zip(src) {
                        *d += coef * s;
                    }
                }
            }
        }
        let p = p1 * p2 * p3;
        let mut out = vec![0.0; p * p];
        for a in 0..p1 {
            for f in 0..p1 {
                for b in 0..p2 {
                    for e in 0..p2 {
                        let src = &g[((a * p1 + f) * p2 * p2 + b * p2 + e) * q3..][..q3];
                        for c in 0..p3 {
                            let row = (a * p2 + b) * p3 + c;
                            let col0 = (f * p2 + e) * p3;
                            out[row * p + col0..row * p + col0 + p3]
                                .copy_from_slice(&src[c * p3..(c + 1) * p3]);
                        }
                    }
                }
            }
        }
        Matrix::new(p, p, out).expect("gram of finite inputs is finite")
    }

    /// Row `i` of the expanded operator.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let [_, n2, n3] = self.row_dims();
        let [_, p2, p3] = self.col_dims();
        let (a, b, c) = (i / (n2 * n3), (i / n3) % n2, i % n3);
        let mut out = vec![0.0; self.ncols()];
        for &(x, vx) in &self.nonzeros[0][a] {
            for &(y, vy) in &self.nonzeros[1][b] {
                for &(z, vz) in &self.nonzeros[2][c] {
                    out[(x * p2 + y) * p3 + z] = vx * vy * vz;
                }
            }
        }
        out
    }

    /// The explicit `n x p` matrix; only sensible for small problems.
    pub fn to_dense(&self) -> Matrix {
        kron(&kron(&self.factors[0], &self.factors[1]), &self.factors[2])
    }
}

fn sparse_rows(m: &Matrix) -> Vec<Vec<(usize, f64)>> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect()
        })
        .collect()
}

/// Background and hot-spot designs for one tensor shape.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub smooth: KronBasis,
    pub hotspot: KronBasis,
}

impl BasisSet {
    pub fn new(smooth: [Matrix; 3], hotspot: [Matrix; 3]) -> Result<Self> {
        let a = KronBasis::new(smooth);
        let b = KronBasis::new(hotspot);
        if a.row_dims() != b.row_dims() {
            return dim_err(format!(
                "smooth bases have row dims {:?} but hot-spot bases {:?}",
                a.row_dims(),
                b.row_dims()
            ));
        }
        Ok(Self { smooth: a, hotspot: b })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.smooth.row_dims()
    }

    /// Dense `X`.
    pub fn x_dense(&self) -> Matrix {
        self.smooth.to_dense()
    }

    /// Dense `Z`.
    pub fn z_dense(&self) -> Matrix {
        self.hotspot.to_dense()
    }
}

/// Spline settings. Empty knot lists fall back to the shape-dependent default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub order: usize,
    pub knots: [Vec<f64>; 3],
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { order: 4, knots: [Vec::new(), Vec::new(), Vec::new()] }
    }
}

/// Knot count per mode: 8/7/7 for a 49x10x26 tensor, 8 otherwise.
pub fn default_knot_counts(dims: [usize; 3]) -> [usize; 3] {
    if dims == [49, 10, 26] {
        [8, 7, 7]
    } else {
        [8, 8, 8]
    }
}

/// Cubic B-spline background bases with identity hot-spot bases.
pub fn default_basis_set(dims: [usize; 3]) -> Result<BasisSet> {
    basis_set(dims, &BasisConfig::default())
}

/// Build a [`BasisSet`] for `dims`. Modes too short for the requested spline
/// get a lower order and fewer knots so no factor has more columns than rows;
/// a single-point mode gets a constant column.
pub fn basis_set(dims: [usize; 3], cfg: &BasisConfig) -> Result<BasisSet> {
    if dims.iter().any(|&d| d == 0) {
        return dim_err(format!("dims must be positive, got {dims:?}"));
    }
    let counts = default_knot_counts(dims);
    let mut smooth = Vec::with_capacity(3);
    for mode in 0..3 {
        let n = dims[mode];
        let m = if !cfg.knots[mode].is_empty() {
            bspline_basis(n, &cfg.knots[mode], cfg.order)?
        } else if n == 1 {
            Matrix::identity(1)
        } else {
            let order = cfg.order.min(n);
            let k = counts[mode].min(n + 2 - order).max(2);
            bspline_basis(n, &equally_spaced_knots(k, KNOT_RANGE), order)?
        };
        smooth.push(m);
    }
    let smooth: [Matrix; 3] = smooth.try_into().expect("three modes");
    BasisSet::new(smooth, dims.map(identity_basis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_spline() {
        let b = bspline_basis(3, &[0.0, 1.0], 1).unwrap();
        assert_eq!((b.rows(), b.cols()), (3, 1));
        assert!(b.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn column_count_and_sparsity() {
        let knots = equally_spaced_knots(8, KNOT_RANGE);
        let b = bspline_basis(49, &knots, 4).unwrap();
        assert_eq!(b.cols(), 10);
        for i in 0..49 {
            let row = b.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.iter().filter(|&&v| v != 0.0).count() <= 5);
        }
    }

    #[test]
    fn bad_knots() {
        assert!(bspline_basis(5, &[1.0, 1.0, 2.0], 2).is_err());
        assert!(bspline_basis(5, &[1.0], 2).is_err());
        assert!(bspline_basis(1, &[1.0, 2.0], 2).is_err());
        assert!(bspline_basis(5, &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn identity_cases() {
        assert_eq!(identity_basis(1).as_slice(), &[1.0]);
        assert!(identity_basis(3).is_identity());
        assert!(kron(&identity_basis(2), &identity_basis(3)).is_identity());
    }

    #[test]
    fn default_surveillance_shape() {
        let b = default_basis_set([49, 10, 26]).unwrap();
        assert_eq!(b.smooth.factors()[0].rows(), 49);
        assert_eq!(b.smooth.col_dims(), [10, 9, 9]);
        assert!(b.hotspot.is_identity());
        assert_eq!(b.hotspot.ncols(), 12740);
    }

    #[test]
    fn tiny_shape() {
        let b = default_basis_set([2, 2, 2]).unwrap();
        assert!(b.z_dense().is_identity());
        assert_eq!(b.z_dense().rows(), 8);
        let b = default_basis_set([1, 3, 2]).unwrap();
        assert!(b.smooth.col_dims().iter().zip(b.dims()).all(|(p, n)| *p <= n));
    }

    #[test]
    fn row_matches_dense() {
        let b = default_basis_set([5, 4, 6]).unwrap();
        let x = b.x_dense();
        for i in [0, 7, 53, 119] {
            assert_eq!(b.smooth.row(i), x.row(i));
        }
    }
}
