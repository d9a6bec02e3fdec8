//! Dense generalized eigenvalue diagnostic for inf-sup and conditioning
//! studies on coarse meshes.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use nalgebra::{DMatrix, SymmetricEigen};

pub const DENSE_EIGEN_CAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues of B^{-1} A, ascending.
    pub eigenvalues: Vec<f64>,
    pub min_abs: f64,
    pub max_abs: f64,
}

/// Full generalized eigenvalue set of `(a, b_norm)` where `b_norm` is
/// symmetric positive definite. Equivalent to the spectrum of
/// `b_norm^{-1} a`, computed via a Cholesky congruence.
pub fn estimate_spectrum(a: &SparseMatrix, b_norm: &SparseMatrix) -> Result<SpectrumReport> {
    let n = a.n_rows;
    if a.n_cols != n || b_norm.n_rows != n || b_norm.n_cols != n {
        return Err(Error::InvalidInput(
            "estimate_spectrum: dimension mismatch".into(),
        ));
    }
    if n > DENSE_EIGEN_CAP {
        return Err(Error::DimensionCap {
            size: n,
            cap: DENSE_EIGEN_CAP,
        });
    }
    let a_dense = a.to_dense();
    let b_dense = b_norm.to_dense();
    let chol = b_dense.cholesky().ok_or(Error::NotPositiveDefinite {
        block: "norm matrix".into(),
        index: 0,
        pivot: f64::NAN,
    })?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}, then symmetrize against round-off.
    let y = l
        .solve_lower_triangular(&a_dense)
        .ok_or_else(|| Error::InvalidInput("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::InvalidInput("singular Cholesky factor".into()))?;
    let c: DMatrix<f64> = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let min_abs = eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    let max_abs = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(SpectrumReport {
        eigenvalues,
        min_abs,
        max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_matrices_give_unit_spectrum() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0), (0, 1, 0.5), (1, 0, 0.5)],
        );
        let report = estimate_spectrum(&a, &a).unwrap();
        for ev in &report.eigenvalues {
            assert!((ev - 1.0).abs() < 1e-12);
        }
        assert!((report.min_abs - 1.0).abs() < 1e-12);
        assert!((report.max_abs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pair_matches_ratios() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -6.0)]);
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 3.0)]);
        let report = estimate_spectrum(&a, &b).unwrap();
        assert!((report.eigenvalues[0] + 2.0).abs() < 1e-12);
        assert!((report.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert!((report.min_abs - 0.5).abs() < 1e-12);
        assert!((report.max_abs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversize_and_indefinite_norm() {
        let n = DENSE_EIGEN_CAP + 1;
        let a = SparseMatrix::identity(n);
        match estimate_spectrum(&a, &a) {
            Err(Error::DimensionCap { .. }) => {}
            other => panic!("expected DimensionCap, got {other:?}"),
        }
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(estimate_spectrum(&a, &b).is_err());
    }
}
