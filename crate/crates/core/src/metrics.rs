use crate::error::{Result, TomoError};
use crate::linalg::hermitian_eig;
use crate::state::DensityMatrix;

fn check_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(TomoError::DimensionMismatch { expected: a.dim(), got: b.dim() })
    }
}

/// `Σ_ij |a_ij − b_ij|²`.
pub fn frobenius_sq(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.matrix().iter().zip(b.matrix().iter()).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// Per-entry mean squared error `‖a − b‖²_F / 4ⁿ`.
pub fn mse(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let d = a.dim() as f64;
    Ok(frobenius_sq(a, b)? / (d * d))
}

/// `½ Σ |λ_k(a − b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a, b)?;
    let eig = hermitian_eig(&(a.matrix() - b.matrix()))?;
    Ok(0.5 * eig.values.iter().map(|l| l.abs()).sum::<f64>())
}
