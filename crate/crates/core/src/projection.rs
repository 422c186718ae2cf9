//! Euclidean projections onto the probability simplex and onto the set of
//! density matrices.

use crate::error::{Result, TomoError};
use crate::linalg::{hermitian_eig, CMatrix};
use crate::state::{hermitize, DensityMatrix};

/// Projection onto `{w : w ≥ 0, Σw = 1}` by sorting and thresholding.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(TomoError::Empty);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(TomoError::NonFinite);
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// Nearest density matrix in Frobenius norm: symmetrize, diagonalize,
/// project the spectrum onto the simplex and recompose.
pub fn project_psd_trace_one(h: &CMatrix) -> Result<DensityMatrix> {
    let eig = hermitian_eig(h)?;
    let projected = project_simplex(&eig.values)?;
    Ok(DensityMatrix::from_trusted(hermitize(eig.recompose_with(&projected))))
}
