//! Small dense linear-algebra helpers bridging `ndarray` containers to
//! `nalgebra` decompositions.
//!
//! Everything here operates on matrices no larger than the subspace rank or
//! the PLDA dimension, so copies between the two representations are cheap.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub fn to_na(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[[r, c]])
}

pub fn to_na_vec(v: ArrayView1<'_, f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |r, _| v[r])
}

pub fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

pub fn from_na_vec(v: &DVector<f64>) -> Array1<f64> {
    Array1::from_shape_fn(v.len(), |r| v[r])
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(to_na(a))
        .ok_or_else(|| Error::Numerical("matrix is not positive-definite".into()))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let chol = cholesky(a)?;
    Ok(from_na_vec(&chol.solve(&to_na_vec(b))))
}

/// Inverse of a symmetric positive-definite matrix, symmetrized on output.
pub fn invert_spd(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let inv = cholesky(a)?.inverse();
    let mut out = from_na(&inv);
    symmetrize(&mut out);
    Ok(out)
}

/// Log-determinant of a symmetric positive-definite matrix.
pub fn logdet_spd(a: ArrayView2<'_, f64>) -> Result<f64> {
    let chol = cholesky(a)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
pub fn sym_eigen_desc(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = nalgebra::SymmetricEigen::new(to_na(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = Array1::from_shape_fn(n, |k| eig.eigenvalues[order[k]]);
    let vectors = Array2::from_shape_fn((n, n), |(r, k)| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Averages `m` with its transpose in place.
pub fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (m[[r, c]] + m[[c, r]]);
            m[[r, c]] = v;
            m[[c, r]] = v;
        }
    }
}
