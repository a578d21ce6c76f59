//! Dense linear-algebra helpers shared by the estimators.
//!
//! Generalized inverses are spectral: eigenvalues of a symmetric PSD matrix
//! below `eps · dim · λ_max` are treated as zero.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::support::Support;

/// Columns of `x` indexed by `s`, in support order.
pub fn columns(x: &DMatrix<f64>, s: &Support) -> DMatrix<f64> {
    x.select_columns(s.indices())
}

/// Rows of `x` listed in `rows`, in the given order.
pub fn rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows)
}

/// Entries of `v` indexed by `s`.
pub fn gather(v: &DVector<f64>, s: &Support) -> DVector<f64> {
    DVector::from_iterator(s.len(), s.iter().map(|j| v[j]))
}

/// Length-`p` vector holding `values` at the positions of `s` and zero elsewhere.
pub fn embed(p: usize, s: &Support, values: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(s.len(), values.len());
    let mut out = DVector::zeros(p);
    for (k, j) in s.iter().enumerate() {
        out[j] = values[k];
    }
    out
}

fn cutoff(eigenvalues: &DVector<f64>, dim: usize) -> f64 {
    let top = eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    f64::EPSILON * dim.max(1) as f64 * top
}

/// Moore-Penrose inverse of a symmetric positive semidefinite matrix.
pub fn pinv_sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let tol = cutoff(&eig.eigenvalues, n);
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > tol {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// `A⁺ b` for symmetric PSD `A`; an ordinary solve when `A` is non-singular.
pub fn ginv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let tol = cutoff(&eig.eigenvalues, n);
    let mut out = DVector::zeros(n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > tol {
            let v = eig.eigenvectors.column(k);
            out += v * (v.dot(b) / lam);
        }
    }
    out
}

/// Numerical rank of a symmetric PSD matrix under the generalized-inverse cutoff.
pub fn rank_sym(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 {
        return 0;
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let tol = cutoff(&eig.eigenvalues, a.nrows());
    eig.eigenvalues.iter().filter(|&&v| v > tol).count()
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Orthogonal projector onto the column span of a matrix, stored as an
/// orthonormal basis `Q` so that `P v = Q Q' v`.
///
/// Equivalent to `X (X'X)⁻ X'` with a generalized inverse, so rank-deficient
/// designs are handled without special cases.
#[derive(Debug, Clone)]
pub struct SpanProjector {
    basis: DMatrix<f64>,
}

impl SpanProjector {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        if x.ncols() == 0 {
            return SpanProjector {
                basis: DMatrix::zeros(n, 0),
            };
        }
        let gram = x.tr_mul(x);
        let eig = SymmetricEigen::new(symmetrize(&gram));
        let tol = cutoff(&eig.eigenvalues, x.nrows().max(x.ncols()));
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > tol)
            .collect();
        let mut basis = DMatrix::zeros(n, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            let col = x * eig.eigenvectors.column(k) / eig.eigenvalues[k].sqrt();
            basis.set_column(c, &col);
        }
        SpanProjector { basis }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `P v`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * self.basis.tr_mul(v)
    }

    /// `(I − P) v`.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    /// `(I − P) A`, column by column.
    pub fn residual_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rank() == 0 {
            return a.clone();
        }
        a - &self.basis * self.basis.tr_mul(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_invertible_matrix_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = pinv_sym(&a);
        let id = &a * &inv;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one_matrix() {
        // [[1,1],[1,1]] has pseudoinverse [[1,1],[1,1]]/4
        let a = DMatrix::from_element(2, 2, 1.0);
        let inv = pinv_sym(&a);
        assert!((inv - DMatrix::from_element(2, 2, 0.25)).abs().max() < 1e-12);
        assert_eq!(rank_sym(&a), 1);
    }

    #[test]
    fn projector_handles_duplicate_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
        let proj = SpanProjector::new(&x);
        assert_eq!(proj.rank(), 1);
        let v = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let r = proj.residual(&v);
        assert!(x.tr_mul(&r).abs().max() < 1e-12);
        assert!((r[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embed_and_gather_are_inverse_on_support() {
        let s = Support::new(vec![1, 3]);
        let v = DVector::from_vec(vec![5.0, -2.0]);
        let full = embed(4, &s, &v);
        assert_eq!(full.as_slice(), &[0.0, 5.0, 0.0, -2.0]);
        assert_eq!(gather(&full, &s), v);
    }
}
