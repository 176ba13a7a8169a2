use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Reciprocal condition threshold below which a cross-product matrix is treated as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Eigenvalue floor for symmetric square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Reciprocal 2-norm condition number of a symmetric PSD matrix.
pub fn rcond_sym(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if max == 0.0 || !min.is_finite() {
        0.0
    } else {
        (min / max).max(0.0)
    }
}

/// Solves `a x = b` for a symmetric positive definite `a`, refusing
/// ill-conditioned systems.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, at: Option<usize>) -> Result<DVector<f64>> {
    let rcond = rcond_sym(a);
    if rcond < RCOND_MIN {
        return Err(Error::Singular { rcond, at });
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::Singular { rcond, at })?;
    Ok(chol.solve(b))
}

/// Inverse of a well-conditioned SPD matrix (used for covariance reporting only).
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rcond = rcond_sym(a);
    if rcond < RCOND_MIN {
        return Err(Error::Singular { rcond, at: None });
    }
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular { rcond, at: None })
}

/// Symmetric square root via eigendecomposition, flooring eigenvalues at [`EIGEN_FLOOR`].
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_sqrt(&a);
        assert!((&r * &r - &a).abs().max() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(rcond_sym(&a) < RCOND_MIN);
        assert!(solve_spd(&a, &DVector::from_vec(vec![1.0, 1.0]), Some(3)).is_err());
    }
}
