//! Small dense symmetric eigenvalue helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`sym_eig_extremes`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest and largest eigenvalue of a symmetric matrix.
///
/// The input is checked for symmetry against `SYMMETRY_TOL` scaled by the
/// largest entry magnitude (floored at one).
pub fn sym_eig_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Err(Error::InvalidInput("eigenvalues of an empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let asym = asymmetry(m);
    let scale = m.amax().max(1.0);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    // symmetrize so rounding-level asymmetry does not leak into the solver
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Spectral norm of a (possibly rectangular) matrix via the Gram matrix.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let gram = m.transpose() * m;
    let (_, hi) = sym_eig_extremes(&gram)?;
    Ok(hi.max(0.0).sqrt())
}

/// `sqrt(|x|^2 + |l|^2)`
pub fn stacked_norm(x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    (x.norm_squared() + lambda.norm_squared()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_extremes() {
        let (lo, hi) = sym_eig_extremes(&DMatrix::identity(3, 3)).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_extremes() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, -1.0]));
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert!((lo + 1.0).abs() < 1e-14);
        assert!((hi - 5.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two() {
        // det([[2-t,1],[1,2-t]]) = (2-t)^2 - 1, roots 1 and 3
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert!((lo - 1.0).abs() < 1e-10);
        assert!((hi - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            sym_eig_extremes(&m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_non_square() {
        assert!(sym_eig_extremes(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_norm_of_row() {
        let m = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert!((spectral_norm(&m).unwrap() - 5.0).abs() < 1e-12);
    }
}
