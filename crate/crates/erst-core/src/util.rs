//! Small shared linear-algebra checks used across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{ErstError, Result};
use crate::tolerances::SYMMETRY_TOL;

/// Largest absolute difference |a_ij - a_ji| over the strict triangle.
pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Error unless `m` is square and symmetric within [`SYMMETRY_TOL`]
/// (relative to the largest entry magnitude, floored at 1).
pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(ErstError::DimensionMismatch {
            context: "square matrix",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(ErstError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Error if any entry is NaN or infinite.
pub(crate) fn check_finite_matrix(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ErstError::NonFinite(context))
    }
}

/// Error if any entry is NaN or infinite.
pub(crate) fn check_finite_vector(v: &DVector<f64>, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ErstError::NonFinite(context))
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}
