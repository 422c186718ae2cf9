//! Pauli measurement settings and their rank-one projectors.
//!
//! A projector `M = QQ*` is kept only as its lifted vector `Q` of length `2ⁿ`;
//! the `2ⁿ × 2ⁿ` matrix is never formed. Settings are enumerated
//! lexicographically over `(X, Y, Z)` words with qubit 0 as the most
//! significant letter, so index `0` is `X…X` and index `3ⁿ - 1` is `Z…Z`.
//! Outcomes are numbered `0..2ⁿ`; bit `k` of the outcome (qubit 0 is the most
//! significant bit) selects the `+1` eigenvector when clear and the `-1`
//! eigenvector when set.

use std::fmt;

use crate::error::{Result, TomoError};
use crate::linalg::{CVector, C64};
use crate::state::{DensityMatrix, QubitCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// Eigenvector for eigenvalue `+1` (`bit = 0`) or `-1` (`bit = 1`).
    pub fn eigenvector(self, bit: usize) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = bit == 0;
        match (self, plus) {
            (PauliAxis::X, true) => [C64::new(h, 0.0), C64::new(h, 0.0)],
            (PauliAxis::X, false) => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            (PauliAxis::Y, true) => [C64::new(h, 0.0), C64::new(0.0, h)],
            (PauliAxis::Y, false) => [C64::new(h, 0.0), C64::new(0.0, -h)],
            (PauliAxis::Z, true) => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            (PauliAxis::Z, false) => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliSetting {
    axes: Vec<PauliAxis>,
    index: usize,
}

impl PauliSetting {
    pub fn from_index(n: QubitCount, index: usize) -> Result<Self> {
        let count = n.settings();
        if index >= count {
            return Err(TomoError::SettingOutOfRange { index, count });
        }
        let q = n.get();
        let mut axes = vec![PauliAxis::X; q];
        let mut rest = index;
        for k in (0..q).rev() {
            axes[k] = PauliAxis::ALL[rest % 3];
            rest /= 3;
        }
        Ok(Self { axes, index })
    }

    pub fn from_axes(axes: Vec<PauliAxis>) -> Result<Self> {
        QubitCount::new(axes.len())?;
        let index = axes.iter().fold(0, |acc, a| acc * 3 + *a as usize);
        Ok(Self { axes, index })
    }

    pub fn axes(&self) -> &[PauliAxis] {
        &self.axes
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn qubits(&self) -> QubitCount {
        QubitCount::new(self.axes.len()).expect("validated on construction")
    }

    pub fn label(&self) -> String {
        self.axes.iter().map(|a| a.to_string()).collect()
    }
}

impl fmt::Display for PauliSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn enumerate_settings(n: QubitCount) -> Vec<PauliSetting> {
    (0..n.settings())
        .map(|i| PauliSetting::from_index(n, i).expect("index in range"))
        .collect()
}

/// One measurement outcome of one setting, stored as the lifted vector `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorBasis {
    pub setting: usize,
    pub outcome: usize,
    pub vector: CVector,
}

impl ProjectorBasis {
    /// `Q* ρ Q = Tr(ρ QQ*)`, computed with one matrix-vector product.
    pub fn expectation(&self, rho: &crate::linalg::CMatrix) -> f64 {
        let rq = rho * &self.vector;
        self.vector.dotc(&rq).re
    }
}

pub fn projector(setting: &PauliSetting, outcome: usize) -> Result<ProjectorBasis> {
    let n = setting.axes.len();
    let dim = 1usize << n;
    if outcome >= dim {
        return Err(TomoError::OutcomeOutOfRange { outcome, dim });
    }
    let mut q = vec![C64::new(1.0, 0.0)];
    for (k, axis) in setting.axes.iter().enumerate() {
        let bit = (outcome >> (n - 1 - k)) & 1;
        let e = axis.eigenvector(bit);
        let mut next = Vec::with_capacity(q.len() * 2);
        for amp in &q {
            next.push(*amp * e[0]);
            next.push(*amp * e[1]);
        }
        q = next;
    }
    Ok(ProjectorBasis {
        setting: setting.index,
        outcome,
        vector: CVector::from_vec(q),
    })
}

/// All `3ⁿ · 2ⁿ` projectors ordered by `(setting, outcome)`.
pub fn dictionary(n: QubitCount) -> Vec<ProjectorBasis> {
    enumerate_settings(n)
        .iter()
        .flat_map(|s| (0..n.dim()).map(move |o| projector(s, o).expect("outcome in range")))
        .collect()
}

/// Exact Born-rule outcome probabilities `p_ν = Q_ν* ρ Q_ν`, clamped to `[0, 1]`.
pub fn born_probabilities(rho: &DensityMatrix, setting: &PauliSetting) -> Result<Vec<f64>> {
    let dim = rho.dim();
    if setting.axes.len() != rho.qubits().get() {
        return Err(TomoError::DimensionMismatch {
            expected: rho.qubits().get(),
            got: setting.axes.len(),
        });
    }
    (0..dim)
        .map(|o| Ok(projector(setting, o)?.expectation(rho.matrix()).clamp(0.0, 1.0)))
        .collect()
}
