//! Small dense linear-algebra helpers shared by the fabric modules.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{FabricError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative ratio `λ_min / λ_max` a metric must exceed to be inverted.
pub const PD_RATIO: f64 = 1e-9;

/// Relative tolerance for the symmetry check on metrics.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Extreme eigenvalues of the symmetric part of `m`.
pub fn eigen_range(m: &Matrix) -> (f64, f64) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    (min, max)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Verifies the scale-free positive-definiteness test used before inversion.
pub fn check_spd(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(FabricError::DimensionMismatch {
            context: "metric (square)",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FabricError::SingularMetric {
            min_eigenvalue: f64::NAN,
            max_eigenvalue: f64::NAN,
        });
    }
    let (min, max) = eigen_range(m);
    if !is_symmetric(m, SYMMETRY_TOL) || max <= 0.0 || min <= PD_RATIO * max {
        return Err(FabricError::SingularMetric {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(())
}

/// Solves `m x = b` for SPD `m` via Cholesky after the positive-definite check.
pub fn spd_solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    crate::error::check_dim("spd_solve rhs", m.nrows(), b.len())?;
    check_spd(m)?;
    let chol = Cholesky::new(symmetrize(m)).ok_or(FabricError::SingularMetric {
        min_eigenvalue: 0.0,
        max_eigenvalue: 0.0,
    })?;
    Ok(chol.solve(b))
}

/// Matrix square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(m: &Matrix) -> Result<(Matrix, Matrix)> {
    check_spd(m)?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let q = &eig.eigenvectors;
    let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.sqrt()));
    let inv_sqrt = sqrt.map(|s| 1.0 / s);
    let root = q * Matrix::from_diagonal(&sqrt) * q.transpose();
    let inv_root = q * Matrix::from_diagonal(&inv_sqrt) * q.transpose();
    Ok((root, inv_root))
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_check_rejects_rank_deficient() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(check_spd(&m), Err(FabricError::SingularMetric { .. })));
        let tiny = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-12]));
        assert!(check_spd(&tiny).is_err());
        let ok = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-6]));
        assert!(check_spd(&ok).is_ok());
    }

    #[test]
    fn spd_check_rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
        assert!(check_spd(&m).is_err());
    }

    #[test]
    fn sqrt_pair_multiplies_back() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (r, ir) = spd_sqrt_pair(&m).unwrap();
        assert!((&r * &r - &m).amax() < 1e-12);
        assert!((&r * &ir - Matrix::identity(2, 2)).amax() < 1e-12);
    }
}
