//! Minimal dense matrix support for the model fitters.
//!
//! The designs here are tall and narrow (thousands of rows, a dozen columns),
//! so a row-major `Vec` with a Cholesky solve on the small normal-equations
//! system covers everything the crate needs.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![R::zero(); n_rows * n_cols],
        }
    }

    /// Builds from row-major data; `data.len()` must equal `n_rows * n_cols`.
    pub fn from_rows(n_rows: usize, n_cols: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "row-major data length mismatch");
        Matrix { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: R) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[R]> {
        self.data.chunks_exact(self.n_cols)
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    /// True if any entry is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }

    /// `X v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[R]) -> Vec<R> {
        assert_eq!(v.len(), self.n_cols);
        self.iter_rows().map(|row| dot(row, v)).collect()
    }

    /// `Xᵀ diag(w) X`, the weighted cross-product of the design.
    // indexed loops: the triangular ranges follow the symmetry of the output
    #[allow(clippy::needless_range_loop)]
    pub fn weighted_cross(&self, w: &[R]) -> Matrix<R> {
        assert_eq!(w.len(), self.n_rows);
        let p = self.n_cols;
        let mut out = Matrix::zeros(p, p);
        for (row, &wi) in self.iter_rows().zip(w) {
            for a in 0..p {
                let wa = wi * row[a];
                for b in a..p {
                    out.data[a * p + b] = out.data[a * p + b] + wa * row[b];
                }
            }
        }
        // mirror the upper triangle
        for a in 0..p {
            for b in 0..a {
                out.data[a * p + b] = out.data[b * p + a];
            }
        }
        out
    }

    /// `Xᵀ v` for a length-`n_rows` vector `v`.
    pub fn t_vec(&self, v: &[R]) -> Vec<R> {
        assert_eq!(v.len(), self.n_rows);
        let mut out = vec![R::zero(); self.n_cols];
        for (row, &vi) in self.iter_rows().zip(v) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o = *o + x * vi;
            }
        }
        out
    }
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Solves the symmetric positive-definite system `A x = b` by Cholesky
/// factorization. On a rank-deficient `A` the failing pivot columns are
/// reported so callers can name the collinear design columns.
// indexed loops: the triangular solves read best with explicit index ranges
#[allow(clippy::needless_range_loop)]
pub fn solve_spd<R: Real>(a: &Matrix<R>, b: &[R]) -> Result<Vec<R>> {
    let p = a.n_cols();
    assert_eq!(a.n_rows(), p, "solve_spd needs a square matrix");
    assert_eq!(b.len(), p);

    // relative pivot tolerance against the largest diagonal entry
    let max_diag = (0..p)
        .map(|j| a.get(j, j).abs())
        .fold(R::zero(), |m, v| if v > m { v } else { m });
    let tol = R::of(1e-12) * if max_diag > R::zero() { max_diag } else { R::one() };

    let mut l = Matrix::zeros(p, p);
    let mut bad_columns = Vec::new();
    for j in 0..p {
        let mut d = a.get(j, j);
        for k in 0..j {
            d = d - l.get(j, k) * l.get(j, k);
        }
        if d <= tol {
            // treat the column as dependent: zero its contribution and move on
            bad_columns.push(j);
            continue;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..p {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    if !bad_columns.is_empty() {
        return Err(Error::SingularDesign { columns: bad_columns });
    }

    // forward solve L y = b
    let mut y = vec![R::zero(); p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s = s - l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // back solve Lᵀ x = y
    let mut x = vec![R::zero(); p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s = s - l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}
