//! Dense order-3 tensors and small dense matrices.
//!
//! Storage is row-major for matrices and last-index-fastest for tensors:
//! entry `(i, j, k)` of an `n1 x n2 x n3` tensor lives at `i*n2*n3 + j*n3 + k`.
//! With that ordering `vec(C x1 B1 x2 B2 x3 B3) = (B1 ⊗ B2 ⊗ B3) vec(C)`.
//! All indices are zero-based.

use crate::error::{dim_err, invalid, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return dim_err(format!("matrix must be non-empty, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return dim_err(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("matrix entry {p} is not finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return dim_err("ragged rows");
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return dim_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return dim_err(format!("matrix has {} cols, vector has {}", self.cols, v.len()));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Kronecker product `a ⊗ b`; block `(i, j)` equals `a[i, j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows * b.rows, a.cols * b.cols, |r, c| {
        a.get(r / b.rows, c / b.cols) * b.get(r % b.rows, c % b.cols)
    })
}

/// Optional names for the three axes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxisLabels {
    pub locations: Vec<String>,
    pub categories: Vec<String>,
    pub periods: Vec<String>,
}

/// Dense order-3 tensor of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
    labels: Option<AxisLabels>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return dim_err(format!("tensor dims must be positive, got {dims:?}"));
        }
        let n: usize = dims.iter().product();
        if data.len() != n {
            return dim_err(format!("dims {dims:?} need {n} values, got {}", data.len()));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("tensor entry {p} is not finite"));
        }
        Ok(Self { dims, data, labels: None })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![0.0; dims.iter().product()], labels: None }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data, labels: None }
    }

    pub fn with_labels(mut self, labels: AxisLabels) -> Result<Self> {
        let got = [labels.locations.len(), labels.categories.len(), labels.periods.len()];
        if got != self.dims {
            return dim_err(format!("label lengths {got:?} do not match dims {:?}", self.dims));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&AxisLabels> {
        self.labels.as_ref()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
            labels: self.labels.clone(),
        }
    }

    /// First `len` frontal slices.
    pub fn leading_periods(&self, len: usize) -> Result<Tensor3> {
        if len == 0 || len > self.dims[2] {
            return dim_err(format!("cannot take {len} of {} periods", self.dims[2]));
        }
        let mut t = Tensor3::from_fn([self.dims[0], self.dims[1], len], |i, j, k| self.get(i, j, k));
        if let Some(l) = &self.labels {
            let mut l = l.clone();
            l.periods.truncate(len);
            t.labels = Some(l);
        }
        Ok(t)
    }
}

/// `vec(t)`, last index fastest.
pub fn vectorize(t: &Tensor3) -> Vec<f64> {
    t.data.clone()
}

/// Inverse of [`vectorize`].
pub fn refold(v: Vec<f64>, dims: [usize; 3]) -> Result<Tensor3> {
    Tensor3::new(dims, v)
}

/// Mode-`mode` product `t x_mode m` (`mode` in `0..3`); contracts `m`'s
/// columns against that axis.
pub fn mode_n_product(t: &Tensor3, m: &Matrix, mode: usize) -> Result<Tensor3> {
    if mode > 2 {
        return dim_err(format!("mode must be 0, 1 or 2, got {mode}"));
    }
    if m.cols != t.dims[mode] {
        return dim_err(format!(
            "mode-{mode} product: matrix has {} cols but axis {mode} has length {}",
            m.cols, t.dims[mode]
        ));
    }
    let mut dims = t.dims;
    dims[mode] = m.rows;
    let data = mode_product_raw(&t.data, t.dims, m.as_slice(), m.rows, mode);
    Ok(Tensor3 { dims, data, labels: None })
}

/// Contract a row-major `rows x dims[mode]` matrix against one axis of a raw
/// last-index-fastest buffer.
pub(crate) fn mode_product_raw(
    src: &[f64],
    dims: [usize; 3],
    m: &[f64],
    rows: usize,
    mode: usize,
) -> Vec<f64> {
    let n_in = dims[mode];
    let outer: usize = dims[..mode].iter().product();
    let inner: usize = dims[mode + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let s_base = o * n_in * inner;
        let d_base = o * rows * inner;
        for r in 0..rows {
            let dst = &mut out[d_base + r * inner..d_base + (r + 1) * inner];
            for c in 0..n_in {
                let a = m[r * n_in + c];
                if a == 0.0 {
                    continue;
                }
                let s = &src[s_base + c * inner..s_base + (c + 1) * inner];
                for (d, x) in dst.iter_mut().zip(s) {
                    *d += a * x;
                }
            }
        }
    }
    out
}

/// `core x1 b1 x2 b2 x3 b3`.
pub fn tucker_reconstruct(core: &Tensor3, b1: &Matrix, b2: &Matrix, b3: &Matrix) -> Result<Tensor3> {
    let t = mode_n_product(core, b1, 0)?;
    let t = mode_n_product(&t, b2, 1)?;
    mode_n_product(&t, b3, 2)
}

/// The `n1 x n2` frontal slice at period `k`.
pub fn frontal_slice(t: &Tensor3, k: usize) -> Result<Matrix> {
    if k >= t.dims[2] {
        return dim_err(format!("period {k} out of range 0..{}", t.dims[2]));
    }
    Ok(Matrix::from_fn(t.dims[0], t.dims[1], |i, j| t.get(i, j, k)))
}
