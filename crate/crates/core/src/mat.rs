//! Dense symmetric matrices in packed upper-triangular storage, tall factor
//! matrices, and the small set of spectral routines the rest of the crate
//! builds on.
//!
//! Symmetry of [`SymMatrix`] is structural: entry `(i, j)` and `(j, i)` read
//! the same storage cell, so it cannot be broken by arithmetic. Inner
//! products and norms account for the off-diagonal cells appearing twice in
//! the full matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real symmetric `d x d` matrix stored as the packed upper triangle
/// (row major, diagonal included), `d(d+1)/2` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

/// Packed length for dimension `d`.
#[inline]
pub fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

#[inline]
fn packed_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * d - i + 1) / 2 + (j - i)
}

impl SymMatrix {
    /// Zero matrix of dimension `d`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix { dim, data: vec![0.0; packed_len(dim)] }
    }

    /// Builds from a packed upper triangle (row major, diagonal first in each row).
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), packed_len(dim), "packed length mismatch");
        SymMatrix { dim, data }
    }

    /// Builds from a dense row-major `d x d` slice, averaging `(i,j)` and `(j,i)`.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), dim * dim);
        let mut data = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                data.push(0.5 * (dense[i * dim + j] + dense[j * dim + i]));
            }
        }
        SymMatrix { dim, data }
    }

    /// Rank-one matrix `w wᵀ`.
    pub fn outer(w: &[f64]) -> Self {
        let dim = w.len();
        let mut data = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                data.push(w[i] * w[j]);
            }
        }
        SymMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Packed storage, row-major upper triangle.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set_entry(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed_index(self.dim, i, j)] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Full `d x d` view as a nalgebra matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                m[(i, j)] = self.data[k];
                m[(j, i)] = self.data[k];
                k += 1;
            }
        }
        m
    }

    /// Packed copy with off-diagonal cells doubled, so that
    /// `dot(a.packed(), b.weighted())` equals the trace inner product `<A, B>`.
    pub fn weighted_packed(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = self.data.clone();
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                if i != j {
                    out[k] *= 2.0;
                }
                k += 1;
            }
        }
        out
    }

    /// Trace inner product `<self, other> = trace(self · other)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.data[k] * other.data[k];
                k += 1;
            }
        }
        acc
    }

    /// Quadratic form `wᵀ · self · w`, equivalently `<w wᵀ, self>`.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.dim);
        let d = self.dim;
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let w2 = if i == j { 1.0 } else { 2.0 };
                acc += w2 * self.data[k] * w[i] * w[j];
                k += 1;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Spectral norm via full symmetric eigendecomposition.
    pub fn spectral_norm(&self) -> f64 {
        let (vals, _) = eigh(self);
        vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a - b).collect();
        SymMatrix { dim: self.dim, data }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a + b).collect();
        SymMatrix { dim: self.dim, data }
    }

    /// Matrix-vector product `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let mut y = vec![0.0; d];
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let a = self.data[k];
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
                k += 1;
            }
        }
        y
    }

    /// Product with a tall factor, `self · U`.
    pub fn mul_factor(&self, u: &FactorMatrix) -> FactorMatrix {
        assert_eq!(self.dim, u.dim());
        let dense = self.to_dense() * u.as_dmatrix();
        FactorMatrix::from_dmatrix(dense)
    }
}

/// Dense real `d x r` factor matrix, the optimization variable of the
/// factorized formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    inner: DMatrix<f64>,
}

impl FactorMatrix {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        assert!(rank >= 1 && rank <= dim, "rank must satisfy 1 <= r <= d");
        FactorMatrix { inner: DMatrix::zeros(dim, rank) }
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Self {
        FactorMatrix { inner }
    }

    pub fn from_row_major(dim: usize, rank: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), dim * rank);
        FactorMatrix { inner: DMatrix::from_row_slice(dim, rank, data) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn rank(&self) -> usize {
        self.inner.ncols()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn as_dmatrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.inner
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Gram product `U Uᵀ` in packed symmetric form.
    pub fn gram(&self) -> SymMatrix {
        let d = self.dim();
        let r = self.rank();
        let mut out = SymMatrix::zeros(d);
        let m = &self.inner;
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for c in 0..r {
                    acc += m[(i, c)] * m[(j, c)];
                }
                out.data[k] = acc;
                k += 1;
            }
        }
        out
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.inner.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &FactorMatrix) {
        assert_eq!(self.inner.shape(), other.inner.shape());
        self.inner.zip_apply(&other.inner, |a, b| *a += s * b);
    }
}

/// Full symmetric eigendecomposition. Returns `(eigenvalues, eigenvectors)`
/// with eigenvectors as columns, in the backend's native order.
pub fn eigh(m: &SymMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let se = nalgebra::SymmetricEigen::new(m.to_dense());
    (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
}

/// Symmetric eigendecomposition sorted by decreasing eigenvalue magnitude,
/// ties broken by the backend's native order.
pub fn eigh_by_magnitude(m: &SymMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = eigh(m);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b].abs().partial_cmp(&vals[a].abs()).unwrap().then(a.cmp(&b))
    });
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = vecs.select_columns(&order);
    (sorted_vals, sorted_vecs)
}

/// Best rank-`r` approximation in the magnitude sense: keeps the `r`
/// eigenvalues largest in absolute value.
pub fn truncate_rank(m: &SymMatrix, r: usize) -> SymMatrix {
    let d = m.dim();
    assert!(r <= d);
    let (vals, vecs) = eigh_by_magnitude(m);
    let mut out = SymMatrix::zeros(d);
    for k in 0..r {
        let v = vecs.column(k);
        let lam = vals[k];
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                out.data[idx] += lam * v[i] * v[j];
                idx += 1;
            }
        }
    }
    out
}

/// Orthonormalizes the columns of a `d x r` matrix (QR, Q factor).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let r = m.ncols();
    let qr = m.clone().qr();
    let q = qr.q();
    q.columns(0, r.min(q.ncols())).into_owned()
}

/// Least-squares slope, intercept and R² of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

/// Validates that `w` has unit Euclidean norm to `tol`.
pub fn check_unit_norm(w: &[f64], tol: f64) -> Result<()> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > tol {
        return Err(Error::NotUnitNorm { norm });
    }
    Ok(())
}
