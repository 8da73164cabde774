//! Thin wrappers over `nalgebra` for the decompositions the crate needs.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DVector, SymmetricEigen};

use crate::matrix::Matrix;

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order (ties keep the solver's
/// ascending index). Each eigenvector (a column of `vectors`) is flipped so
/// that its largest-magnitude entry is positive; among equal magnitudes the
/// first one wins.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn symmetric_eigen(m: &Matrix) -> SortedEigen {
    let n = m.rows();
    let eig = SymmetricEigen::new(m.to_dmatrix());
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ascending index among ties
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut vectors = Matrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    SortedEigen { values, vectors }
}

/// Cholesky factorisation of a symmetric positive definite matrix.
pub struct SpdFactor {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl SpdFactor {
    pub fn new(m: &Matrix) -> Option<Self> {
        let chol = Cholesky::new(m.to_dmatrix())?;
        let diag_ok = chol.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0);
        diag_ok.then_some(Self { chol })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.chol.solve(&DVector::from_column_slice(b));
        x.iter().copied().collect()
    }

    pub fn inverse(&self) -> Matrix {
        let inv = self.chol.inverse();
        let mut out = Matrix::from_dmatrix(&inv);
        symmetrize(&mut out);
        out
    }
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Indices of columns that are linearly dependent on earlier columns of the
/// Gram matrix `gram` (in column order).
///
/// The Gram matrix is scaled to unit diagonal first; a column whose residual
/// squared norm after projecting out the accepted columns falls below
/// `tolerance` is reported. Zero columns are always reported.
pub fn dependent_columns(gram: &Matrix, tolerance: f64) -> Vec<usize> {
    let n = gram.rows();
    let scale: Vec<f64> = (0..n).map(|i| libm::sqrt(gram[(i, i)].max(0.0))).collect();
    let mut accepted: Vec<usize> = Vec::new();
    // rows of the partial Cholesky factor for accepted columns, indexed by column
    let mut factor: Vec<Vec<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..n {
        if scale[j] == 0.0 {
            dependent.push(j);
            continue;
        }
        // l_j[k] for each accepted k
        let mut l = Vec::with_capacity(accepted.len());
        for (k, &ak) in accepted.iter().enumerate() {
            let mut v = gram[(j, ak)] / (scale[j] * scale[ak]);
            for (m, lk) in factor[k].iter().enumerate().take(k) {
                v -= l[m] * lk;
            }
            v /= factor[k][k];
            l.push(v);
        }
        let residual = 1.0 - l.iter().map(|x| x * x).sum::<f64>();
        if residual < tolerance {
            dependent.push(j);
        } else {
            l.push(libm::sqrt(residual));
            factor.push(l);
            accepted.push(j);
        }
    }
    dependent
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn eigen_sorted_and_signed() {
        let m = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = symmetric_eigen(&m);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        for j in 0..2 {
            let col = e.vectors.column(j);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() + 1e-12 { b } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let m = Matrix::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let f = SpdFactor::new(&m).unwrap();
        let inv = f.inverse();
        let id = m.matmul(&inv).unwrap();
        assert!(id.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        let x = f.solve(&[1.0, 2.0]);
        let back = m.mul_vec(&x);
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(SpdFactor::new(&m).is_none());
    }

    #[test]
    fn finds_dependent_columns() {
        // columns: a, b, a+b, 0
        let x = Matrix::from_vec(
            3,
            4,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 2.0, 0.0],
        )
        .unwrap();
        let g = x.transpose().matmul(&x).unwrap();
        assert_eq!(dependent_columns(&g, 1e-10), vec![2, 3]);
    }
}
