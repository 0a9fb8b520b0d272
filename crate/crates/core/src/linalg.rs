//! Dense symmetric linear algebra: row-major matrices, a cyclic Jacobi
//! eigensolver, Moore-Penrose pseudo-inverse, PCA, and pairwise distances.
//!
//! Everything here is a pure function over immutable inputs; sizes stay in
//! the hundreds of rows/columns, so the solver favors robustness over
//! asymptotic speed.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximum allowed absolute asymmetry before a matrix is rejected as
/// non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Jacobi sweep cap.
const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal threshold at which the Jacobi iteration stops.
const OFF_DIAG_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a row-major buffer. The entry count must match and every
    /// entry must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 1 || cols < 1 {
            return Err(Error::Dimension(format!(
                "matrix dimensions must be >= 1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "matrix entries must be finite, found {bad}"
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix must have at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        assert!(!indices.is_empty(), "select_rows needs at least one row");
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (i, &r) in indices.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                let o_row = out.row_mut(i);
                for (j, &bkj) in b_row.iter().enumerate() {
                    o_row[j] += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(m)
    }

    /// `self + s * I`; requires a square matrix.
    pub fn add_scaled_identity(&self, s: f64) -> Matrix {
        assert_eq!(self.rows, self.cols, "add_scaled_identity needs a square matrix");
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += s;
        }
        m
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues sorted non-increasing, paired with unit-norm eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input must be square and symmetric within [`SYMMETRY_TOL`]. Columns
/// of the result are unit-norm, sorted by non-increasing eigenvalue, and
/// sign-fixed so the largest-magnitude component of each column is positive.
pub fn sym_eigen(m: &Matrix) -> Result<EigenResult> {
    if m.rows != m.cols {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    let n = m.rows;
    let mut a = m.clone();
    // Symmetrize exactly so the rotations see a_pq == a_qp.
    for p in 0..n {
        for q in (p + 1)..n {
            let v = 0.5 * (a.get(p, q) + a.get(q, p));
            a.set(p, q, v);
            a.set(q, p, v);
        }
    }
    let mut v = Matrix::identity(n);

    let scale = m.frob_norm();
    if scale == 0.0 {
        return Ok(EigenResult {
            eigenvalues: vec![0.0; n],
            eigenvectors: v,
        });
    }
    let stop = OFF_DIAG_TOL * scale;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() <= stop {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Stable rotation angle (Numerical Recipes formulation).
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);

                for j in 0..n {
                    if j == p || j == q {
                        continue;
                    }
                    let ajp = a.get(j, p);
                    let ajq = a.get(j, q);
                    let new_p = ajp - s * (ajq + tau * ajp);
                    let new_q = ajq + s * (ajp - tau * ajq);
                    a.set(j, p, new_p);
                    a.set(p, j, new_p);
                    a.set(j, q, new_q);
                    a.set(q, j, new_q);
                }
                for j in 0..n {
                    let vjp = v.get(j, p);
                    let vjq = v.get(j, q);
                    v.set(j, p, vjp - s * (vjq + tau * vjp));
                    v.set(j, q, vjq + s * (vjp - tau * vjq));
                }
            }
        }
    }
    if !converged {
        // One last check: the final sweep may have pushed us under the bar.
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() > stop {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(a.get(src, src));
        let mut col = v.column(src);
        normalize_and_fix_sign(&mut col);
        for (r, &val) in col.iter().enumerate() {
            eigenvectors.set(r, dst, val);
        }
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Unit-normalizes and flips sign so the largest-magnitude component
/// (lowest index on ties) is positive.
pub fn normalize_and_fix_sign(col: &mut [f64]) {
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in col.iter_mut() {
            *v /= norm;
        }
    }
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its
/// eigendecomposition. Eigenvalues with magnitude at most `rank_tol`
/// (default: `n * machine_eps * max|lambda|`) are treated as zero.
pub fn pseudo_inverse(m: &Matrix, rank_tol: Option<f64>) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    let n = m.rows();
    let lam_max = eig
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0_f64, f64::max);
    let tol = rank_tol.unwrap_or(n as f64 * f64::EPSILON * lam_max);

    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= tol {
            continue;
        }
        let inv = 1.0 / lam;
        let col = eig.eigenvectors.column(k);
        for r in 0..n {
            for c in 0..n {
                let v = out.get(r, c) + inv * col[r] * col[c];
                out.set(r, c, v);
            }
        }
    }
    Ok(out)
}

/// Centers `data` (n x d) and returns an orthonormal basis of the top
/// `target_dim` principal directions together with the projected data,
/// columns ordered by non-increasing variance.
pub fn pca_fit_transform(data: &Matrix, target_dim: usize) -> Result<(Matrix, Matrix)> {
    let n = data.rows();
    let d = data.cols();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let limit = d.min(n - 1);
    if target_dim < 1 || target_dim > limit {
        return Err(Error::Dimension(format!(
            "PCA target dimension {target_dim} out of range 1..={limit} for {n}x{d} data"
        )));
    }

    let mean = column_means(data);
    let centered = center_rows(data, &mean);

    // Scatter matrix; eigenvalue order equals variance order.
    let mut scatter = Matrix::zeros(d, d);
    for r in 0..n {
        let row = centered.row(r);
        for i in 0..d {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..d {
                let v = scatter.get(i, j) + xi * row[j];
                scatter.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            scatter.set(j, i, scatter.get(i, j));
        }
    }

    let eig = sym_eigen(&scatter)?;
    let mut basis = Matrix::zeros(d, target_dim);
    for c in 0..target_dim {
        for r in 0..d {
            basis.set(r, c, eig.eigenvectors.get(r, c));
        }
    }
    let projected = centered.matmul(&basis)?;
    Ok((basis, projected))
}

/// Per-column means of a data matrix.
pub fn column_means(data: &Matrix) -> Vec<f64> {
    let n = data.rows() as f64;
    let mut mean = vec![0.0; data.cols()];
    for r in 0..data.rows() {
        for (m, v) in mean.iter_mut().zip(data.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Subtracts `mean` from every row.
pub fn center_rows(data: &Matrix, mean: &[f64]) -> Matrix {
    assert_eq!(mean.len(), data.cols());
    let mut out = data.clone();
    for r in 0..out.rows() {
        for (v, m) in out.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    out
}

/// Squared Euclidean distances between all rows of `a` and all rows of `b`.
pub fn pairwise_sq_dist(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::Dimension(format!(
            "pairwise distances need equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ra = a.row(i);
        for j in 0..b.rows() {
            out.set(i, j, sq_dist(ra, b.row(j)));
        }
    }
    Ok(out)
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
