//! Dense complex linear algebra used throughout the crate: the matrix aliases
//! and a cyclic Jacobi eigensolver for Hermitian matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, TomoError};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const OFF_DIAGONAL_THRESHOLD: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `H = V diag(values) V*`.
///
/// Eigenvalues are sorted ascending. Each eigenvector column is rotated so its
/// largest-magnitude component (first one on ties) is real and positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    /// Rebuilds `V diag(g(λ)) V*`.
    pub fn recompose_with(&self, values: &[f64]) -> CMatrix {
        let dim = self.values.len();
        let mut out = CMatrix::zeros(dim, dim);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for j in 0..dim {
                let vj = v[j].conj() * lambda;
                for i in 0..dim {
                    out[(i, j)] += v[i] * vj;
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> CMatrix {
        self.recompose_with(&self.values)
    }
}

pub fn hermitian_part(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// The input is symmetrized as `(H + H*)/2` first. Sweeps stop once the
/// off-diagonal Frobenius norm drops below `1e-12` relative to `‖H‖_F`.
pub fn hermitian_eig(h: &CMatrix) -> Result<EigenDecomposition> {
    if h.nrows() != h.ncols() {
        return Err(TomoError::DimensionMismatch {
            expected: h.nrows(),
            got: h.ncols(),
        });
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(TomoError::NonFinite);
    }
    let n = h.nrows();
    let mut a = hermitian_part(h);
    let mut v = CMatrix::identity(n, n);
    let scale = frobenius_norm(&a);
    let threshold = OFF_DIAGONAL_THRESHOLD * scale;

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));

    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Zeroes `a[p, q]` with a unitary plane rotation `J`, updating `a ← J* a J`
/// and `v ← v J`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let n = a.nrows();
    let phase = apq / g;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let s_phase = phase * s; // J[p, q]
    let s_phase_conj = s_phase.conj(); // -J[q, p]

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * s_phase_conj;
        a[(k, q)] = akp * s_phase + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * s_phase;
        a[(q, k)] = apk * s_phase_conj + aqk * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s_phase_conj;
        v[(k, q)] = vkp * s_phase + vkq * c;
    }
}

fn fix_phase(col: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        // strict comparison keeps the first index on ties
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let rot = col[best].conj() / best_mag;
        for z in col.iter_mut() {
            *z *= rot;
        }
        col[best] = C64::new(col[best].re, 0.0);
    }
}
