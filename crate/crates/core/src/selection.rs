//! Adaptive setting selection.
//!
//! An intermediate estimate is decomposed over the Pauli projector dictionary
//! with minimal L1 norm subject to a Frobenius residual bound. The absolute
//! coefficient mass of each setting becomes its share of the next round's
//! copies, rounded to integers by the largest-remainder rule.

use std::io::Write;

use crate::error::{Result, TomoError};
use crate::linalg::CMatrix;
use crate::pauli::ProjectorBasis;
use crate::state::DensityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Frobenius residual bound `‖Σ S M − ρ‖_F ≤ ε`.
    pub epsilon: f64,
    /// Penalty multiplier between continuation stages.
    pub shrink_factor: f64,
    pub max_stages: usize,
    /// Proximal-gradient iterations per stage.
    pub max_iterations: usize,
    /// Stage stops when no coefficient moves by more than this.
    pub inner_tolerance: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            shrink_factor: 0.5,
            max_stages: 40,
            max_iterations: 20_000,
            inner_tolerance: 1e-12,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.max_stages > 0
            && self.max_iterations > 0
            && self.inner_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TomoError::InvalidPlan(format!("invalid selection config {self:?}")))
        }
    }
}

/// Dictionary coefficients `S_{μ,ν}` in `(μ, ν)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub entries: Vec<f64>,
    pub outcomes_per_setting: usize,
    /// Frobenius residual of the accepted solution.
    pub residual: f64,
    /// Penalty at which the residual bound was met.
    pub lambda: f64,
    pub stages: usize,
}

impl CoefficientVector {
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|s| s.abs()).sum()
    }
}

/// Real coordinates of a Hermitian matrix in which the Euclidean norm is the
/// Frobenius norm: diagonal entries, then `√2·Re` and `√2·Im` of each strict
/// upper-triangular entry.
pub fn hermitian_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(s * m[(i, j)].re);
            out.push(s * m[(i, j)].im);
        }
    }
    out
}

fn atom_coordinates(p: &ProjectorBasis) -> Vec<f64> {
    let v = &p.vector;
    hermitian_coordinates(&(v * v.adjoint()))
}

struct Design {
    /// Column-major: `atoms[k]` is the coordinate vector of atom `k`.
    atoms: Vec<Vec<f64>>,
    rows: usize,
}

impl Design {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (atom, &c) in self.atoms.iter().zip(s) {
            if c != 0.0 {
                for (o, a) in out.iter_mut().zip(atom) {
                    *o += c * a;
                }
            }
        }
    }

    fn adjoint(&self, r: &[f64], out: &mut [f64]) {
        for (o, atom) in out.iter_mut().zip(&self.atoms) {
            *o = atom.iter().zip(r).map(|(a, b)| a * b).sum();
        }
    }

    fn norm_sq(&self) -> f64 {
        let n = self.atoms.len();
        let mut x = vec![1.0; n];
        let mut y = vec![0.0; self.rows];
        let mut estimate = 0.0;
        for _ in 0..500 {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            self.apply(&x, &mut y);
            let next: f64 = y.iter().map(|v| v * v).sum();
            self.adjoint(&y, &mut x);
            if (next - estimate).abs() <= 1e-12 * next {
                estimate = next;
                break;
            }
            estimate = next;
        }
        estimate * 1.01
    }
}

fn residual_norm(design: &Design, s: &[f64], target: &[f64], scratch: &mut [f64]) -> f64 {
    design.apply(s, scratch);
    scratch.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Minimal-L1 decomposition `ρ ≈ Σ S_{μ,ν} M_{μ,ν}` with `‖Σ S M − ρ‖_F ≤ ε`.
///
/// Solves `min λ‖S‖₁ + ½‖Σ S M − ρ‖²_F` by FISTA with gradient-based restart,
/// warm-started along `λ_k = λ₀·shrink^k` where `λ₀ = ‖D*ρ‖_∞` (the penalty
/// at which `S = 0` is optimal), and accepts the first stage meeting the bound.
pub fn decompose_l1(
    rho: &DensityMatrix,
    dictionary: &[ProjectorBasis],
    config: &SelectionConfig,
) -> Result<CoefficientVector> {
    config.validate()?;
    if dictionary.is_empty() {
        return Err(TomoError::Empty);
    }
    if let Some(p) = dictionary.iter().find(|p| p.vector.len() != rho.dim()) {
        return Err(TomoError::DimensionMismatch { expected: rho.dim(), got: p.vector.len() });
    }
    let target = hermitian_coordinates(rho.matrix());
    let design = Design { atoms: dictionary.iter().map(atom_coordinates).collect(), rows: target.len() };
    let n = dictionary.len();
    let step = 1.0 / design.norm_sq();

    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; design.rows];
    design.adjoint(&target, &mut grad);
    let lambda0 = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let mut s = vec![0.0; n];
    let mut best_residual = f64::INFINITY;
    if lambda0 == 0.0 {
        // ρ orthogonal to every atom; only possible for the zero matrix
        return Err(TomoError::ResidualUnreachable { epsilon: config.epsilon, best: target.iter().map(|x| x * x).sum::<f64>().sqrt() });
    }

    let mut lambda = lambda0;
    let mut y = s.clone();
    let mut next = vec![0.0; n];
    for stage in 1..=config.max_stages {
        lambda *= config.shrink_factor;
        let threshold = lambda * step;
        let mut t = 1.0f64;
        y.copy_from_slice(&s);
        for _ in 0..config.max_iterations {
            design.apply(&y, &mut scratch);
            scratch.iter_mut().zip(&target).for_each(|(a, b)| *a -= b);
            design.adjoint(&scratch, &mut grad);
            let mut max_change = 0.0f64;
            let mut restart_dot = 0.0;
            for k in 0..n {
                let v = y[k] - step * grad[k];
                next[k] = if v > threshold {
                    v - threshold
                } else if v < -threshold {
                    v + threshold
                } else {
                    0.0
                };
                let delta = next[k] - s[k];
                max_change = max_change.max(delta.abs());
                restart_dot += (y[k] - next[k]) * delta;
            }
            let t_next = if restart_dot > 0.0 {
                1.0
            } else {
                0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
            };
            let momentum = if restart_dot > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            for k in 0..n {
                y[k] = next[k] + momentum * (next[k] - s[k]);
            }
            s.copy_from_slice(&next);
            t = t_next;
            if max_change < config.inner_tolerance {
                break;
            }
        }
        let residual = residual_norm(&design, &s, &target, &mut scratch);
        best_residual = best_residual.min(residual);
        if residual <= config.epsilon {
            return Ok(CoefficientVector {
                entries: s,
                outcomes_per_setting: rho.dim(),
                residual,
                lambda,
                stages: stage,
            });
        }
    }
    Err(TomoError::ResidualUnreachable { epsilon: config.epsilon, best: best_residual })
}

/// Normalized absolute coefficient mass per setting,
/// `w_μ = Σ_ν |S_{μ,ν}| / ‖S‖₁`.
pub fn setting_weights(s: &CoefficientVector) -> Result<Vec<f64>> {
    let sums = setting_masses(s);
    let total: f64 = sums.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(TomoError::ZeroCoefficients);
    }
    Ok(sums.iter().map(|x| x / total).collect())
}

/// `Σ_ν |S_{μ,ν}|` for every setting.
pub fn setting_masses(s: &CoefficientVector) -> Vec<f64> {
    s.entries
        .chunks(s.outcomes_per_setting)
        .map(|c| c.iter().map(|x| x.abs()).sum())
        .collect()
}

/// Integer copy counts per setting.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllocationVector {
    counts: Vec<u64>,
}

impl AllocationVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `3ⁿ N_μ / Σ N`.
    pub fn boost_factors(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let settings = self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| if total > 0.0 { settings * c as f64 / total } else { 0.0 })
            .collect()
    }
}

/// `⌊budget / settings⌋` each, with the remainder handed out one copy at a
/// time in enumeration order.
pub fn uniform_allocation(settings: usize, budget: u64) -> AllocationVector {
    let base = budget / settings as u64;
    let extra = (budget % settings as u64) as usize;
    AllocationVector::new((0..settings).map(|i| base + u64::from(i < extra)).collect())
}

/// Largest-remainder apportionment of `budget` copies proportional to
/// `weights`. Ties in the remainder go to the lower setting index.
pub fn allocate_copies(weights: &[f64], budget: u64) -> Result<AllocationVector> {
    if weights.is_empty() {
        return Err(TomoError::Empty);
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
        return Err(TomoError::NegativeWeight { index, value });
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(TomoError::ZeroCoefficients);
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * budget as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let mut assigned: u64 = counts.iter().sum();
    while assigned > budget {
        // float round-off pushed the floors past the budget
        let k = (0..counts.len())
            .filter(|&k| counts[k] > 0)
            .min_by(|&a, &b| (quotas[a] - counts[a] as f64).total_cmp(&(quotas[b] - counts[b] as f64)))
            .expect("some positive count");
        counts[k] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = budget - assigned;
    for &k in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[k] += 1;
        remaining -= 1;
    }
    Ok(AllocationVector::new(counts))
}

/// Per-setting summary written after each selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub masses: Vec<f64>,
    pub weights: Vec<f64>,
    pub allocation: AllocationVector,
    pub l1_norm: f64,
    pub residual: f64,
}

impl SelectionRecord {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "setting_index,S_mu,w_mu,N_mu")?;
        for (mu, ((s, wt), n)) in self.masses.iter().zip(&self.weights).zip(self.allocation.counts()).enumerate() {
            writeln!(w, "{mu},{s:e},{wt:e},{n}")?;
        }
        Ok(())
    }
}

/// Decomposes `rho`, derives setting weights and allocates `budget` copies.
pub fn select_settings(
    rho: &DensityMatrix,
    dictionary: &[ProjectorBasis],
    config: &SelectionConfig,
    budget: u64,
) -> Result<SelectionRecord> {
    let s = decompose_l1(rho, dictionary, config)?;
    let weights = setting_weights(&s)?;
    let allocation = allocate_copies(&weights, budget)?;
    Ok(SelectionRecord {
        masses: setting_masses(&s),
        weights,
        allocation,
        l1_norm: s.l1_norm(),
        residual: s.residual,
    })
}
