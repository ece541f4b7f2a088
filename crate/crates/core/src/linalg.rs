//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition threshold below which a covariance inverse is refused.
pub const RCOND_MIN: f64 = 1e-12;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse through LU with partial pivoting, rejecting matrices whose
/// 1-norm reciprocal condition number falls below [`RCOND_MIN`].
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cannot invert a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let norm = norm_one(m);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::SingularCovariance { rcond: 0.0 });
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularCovariance { rcond: 0.0 })?;
    let rcond = 1.0 / (norm * norm_one(&inv));
    if !(rcond >= RCOND_MIN) {
        return Err(Error::SingularCovariance { rcond });
    }
    Ok(inv)
}

pub fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

/// Symmetric eigen-decomposition that clips slightly negative eigenvalues.
///
/// Eigenvalues in `[-tol * trace, 0)` are set to zero and the flag is raised;
/// anything more negative is reported as [`Error::NotPsd`].
pub fn clip_psd(m: &DMatrix<f64>, rel_tol: f64) -> Result<(DMatrix<f64>, bool)> {
    let sym = symmetrize(m);
    let trace = sym.trace().abs();
    let eig = SymmetricEigen::new(sym.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig >= 0.0 {
        return Ok((sym, false));
    }
    if min_eig < -rel_tol * trace.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eig });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok((symmetrize(&rebuilt), true))
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix and its numerical rank.
pub fn sym_pinv(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cutoff = max * (m.nrows() as f64) * f64::EPSILON * 16.0;
    let mut rank = 0;
    let inv_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| {
            if v.abs() > cutoff && v.abs() > 0.0 {
                rank += 1;
                1.0 / v
            } else {
                0.0
            }
        }),
    );
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    (pinv, rank)
}

/// Least-squares solve through a Cholesky of the normal equations, falling back
/// to SVD when the Gram matrix is not positive definite.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = x.transpose() * x;
    let rhs = x.transpose() * y;
    if let Some(ch) = gram.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    let svd = x.clone().svd(true, true);
    svd.solve(y, 1e-12).map_err(|e| Error::DegenerateDesign(e.to_string()))
}
