//! Density matrices, pure states and the test-state generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, TomoError};
use crate::linalg::{hermitian_eig, CMatrix, CVector, C64};

pub const MAX_QUBITS: usize = 5;

/// Structural tolerance for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Aggregate tolerance for trace and spectrum checks.
pub const AGGREGATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitCount(usize);

impl QubitCount {
    pub fn new(n: usize) -> Result<Self> {
        if (1..=MAX_QUBITS).contains(&n) {
            Ok(Self(n))
        } else {
            Err(TomoError::QubitCount(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Hilbert-space dimension `2ⁿ`.
    pub fn dim(self) -> usize {
        1 << self.0
    }

    /// Number of Pauli measurement settings `3ⁿ`.
    pub fn settings(self) -> usize {
        3usize.pow(self.0 as u32)
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim.is_power_of_two() && dim >= 2 {
            Self::new(dim.trailing_zeros() as usize)
        } else {
            Err(TomoError::InvalidDensityMatrix(format!(
                "dimension {dim} is not a power of two >= 2"
            )))
        }
    }
}

/// Normalized state vector `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        QubitCount::from_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(TomoError::InvalidDensityMatrix("zero or non-finite state vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix::from_trusted(hermitize(m))
    }
}

/// Hermitian, positive semidefinite, unit-trace `2ⁿ × 2ⁿ` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    qubits: QubitCount,
}

impl DensityMatrix {
    /// Validates every density-matrix invariant.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(TomoError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let qubits = QubitCount::from_dim(matrix.nrows())?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(TomoError::NonFinite);
        }
        let asym = hermitian_defect(&matrix);
        if asym > HERMITIAN_TOL {
            return Err(TomoError::InvalidDensityMatrix(format!(
                "not Hermitian (max |ρ - ρ*| = {asym:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > AGGREGATE_TOL || trace.im.abs() > AGGREGATE_TOL {
            return Err(TomoError::InvalidDensityMatrix(format!(
                "trace {} + {}i differs from 1",
                trace.re, trace.im
            )));
        }
        let min_eig = hermitian_eig(&matrix)?.values[0];
        if min_eig < -AGGREGATE_TOL {
            return Err(TomoError::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { matrix, qubits })
    }

    /// Skips validation; callers construct the matrix so the invariants hold.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        let qubits = QubitCount::from_dim(matrix.nrows()).expect("power-of-two dimension");
        Self { matrix, qubits }
    }

    pub fn maximally_mixed(n: QubitCount) -> Self {
        let d = n.dim();
        Self::from_trusted(CMatrix::identity(d, d).unscale(d as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn qubits(&self) -> QubitCount {
        self.qubits
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eig(&self.matrix).map(|e| e.values[0]).unwrap_or(f64::NAN)
    }
}

pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` by its exact Hermitian part so the defect is zero.
pub(crate) fn hermitize(mut m: CMatrix) -> CMatrix {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    m
}

fn basis_superposition(dim: usize, indices: &[usize]) -> PureState {
    let mut amps = CVector::zeros(dim);
    for &i in indices {
        amps[i] = C64::new(1.0, 0.0);
    }
    PureState::new(amps).expect("non-empty superposition")
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn cat_state(n: QubitCount) -> DensityMatrix {
    let d = n.dim();
    basis_superposition(d, &[0, d - 1]).density_matrix()
}

/// `(|0…01…1⟩ + |1…10…0⟩)/√2` with the excitation split after the first
/// `⌊n/2⌋` qubits; for two qubits this is `(|01⟩ + |10⟩)/√2`.
pub fn noon_state(n: QubitCount) -> Result<DensityMatrix> {
    let q = n.get();
    if q < 2 {
        return Err(TomoError::StateTooSmall { state: "NOON", min: 2, got: q });
    }
    let d = n.dim();
    let low = q - q / 2; // trailing (least significant) qubits
    let ones_low = (1usize << low) - 1;
    let ones_high = (d - 1) ^ ones_low;
    Ok(basis_superposition(d, &[ones_low, ones_high]).density_matrix())
}

/// Equal superposition of the `n` single-excitation basis states.
pub fn w_state(n: QubitCount) -> Result<DensityMatrix> {
    let q = n.get();
    if q < 2 {
        return Err(TomoError::StateTooSmall { state: "W", min: 2, got: q });
    }
    let idx: Vec<usize> = (0..q).map(|k| 1usize << k).collect();
    Ok(basis_superposition(n.dim(), &idx).density_matrix())
}

/// Ginibre-ensemble state `AA*/Tr(AA*)` where `A` is `2ⁿ × rank` with i.i.d.
/// standard normal real and imaginary parts.
///
/// `A` is filled column by column, row by row, real part before imaginary,
/// from a ChaCha8 stream seeded with `seed`.
pub fn random_density_matrix(n: QubitCount, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let d = n.dim();
    if rank == 0 || rank > d {
        return Err(TomoError::InvalidRank { rank, dim: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = CMatrix::zeros(d, rank);
    for j in 0..rank {
        for i in 0..d {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            a[(i, j)] = C64::new(re, im);
        }
    }
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    Ok(DensityMatrix::from_trusted(hermitize(m.unscale(tr))))
}
