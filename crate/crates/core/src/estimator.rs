//! L1 density-matrix estimator.
//!
//! Solves
//!
//! ```text
//! minimize   Σ_i w_i |Q_i* ρ Q_i − f_i|
//! subject to ρ ⪰ 0, Tr ρ = 1
//! ```
//!
//! with a linearized ADMM splitting on `z = A(ρ) − f`: a projected gradient
//! step on the augmented term (projection onto density matrices), a
//! soft-thresholding step on `z`, and a scaled dual update. Every iterate is
//! feasible, and the iterate with the lowest objective is returned.

use std::io::Write;

use crate::error::{Result, TomoError};
use crate::linalg::{CMatrix, C64};
use crate::measurement::FrequencyTable;
use crate::pauli::ProjectorBasis;
use crate::projection::project_psd_trace_one;
use crate::state::DensityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the objective changes by less than this between iterations
    /// and the splitting residual `‖A(ρ) − f − z‖₂` is below its square root.
    pub convergence_tolerance: f64,
    /// Primal step as a fraction of `1/‖A‖²`; must stay below 1.
    pub step_size: f64,
    /// Augmented-Lagrangian weight `β`.
    pub penalty_parameter: f64,
    /// Keep a per-iteration trace in the diagnostics.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            convergence_tolerance: 1e-10,
            step_size: 0.95,
            penalty_parameter: 1.0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.convergence_tolerance > 0.0
            && self.step_size > 0.0
            && self.step_size < 1.0
            && self.penalty_parameter > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TomoError::InvalidPlan(format!("invalid solver config {self:?}")))
        }
    }
}

/// Measurement terms paired with their observed values.
#[derive(Debug, Clone)]
pub struct EstimationProblem {
    pub projectors: Vec<ProjectorBasis>,
    pub frequencies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EstimationProblem {
    /// Uniform weights.
    pub fn new(projectors: Vec<ProjectorBasis>, frequencies: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; frequencies.len()];
        Self::weighted(projectors, frequencies, weights)
    }

    pub fn weighted(projectors: Vec<ProjectorBasis>, frequencies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if projectors.len() != frequencies.len() {
            return Err(TomoError::DimensionMismatch { expected: projectors.len(), got: frequencies.len() });
        }
        if weights.len() != frequencies.len() {
            return Err(TomoError::DimensionMismatch { expected: frequencies.len(), got: weights.len() });
        }
        if projectors.is_empty() {
            return Err(TomoError::Empty);
        }
        let dim = projectors[0].vector.len();
        if let Some(p) = projectors.iter().find(|p| p.vector.len() != dim) {
            return Err(TomoError::DimensionMismatch { expected: dim, got: p.vector.len() });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| w.is_nan() || **w < 0.0) {
            return Err(TomoError::NegativeWeight { index, value });
        }
        if frequencies.iter().any(|f| !f.is_finite()) {
            return Err(TomoError::NonFinite);
        }
        Ok(Self { projectors, frequencies, weights })
    }

    /// Pairs the full dictionary with a frequency table in `(μ, ν)` order.
    pub fn from_table(dictionary: &[ProjectorBasis], table: &FrequencyTable) -> Result<Self> {
        Self::new(dictionary.to_vec(), table.flatten())
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].vector.len()
    }

    pub fn objective(&self, rho: &CMatrix) -> f64 {
        forward_map_matrix(rho, &self.projectors)
            .iter()
            .zip(&self.frequencies)
            .zip(&self.weights)
            .map(|((a, f), w)| w * (a - f).abs())
            .sum()
    }
}

/// `Q_i* ρ Q_i` for every projector.
pub fn forward_map(rho: &DensityMatrix, projectors: &[ProjectorBasis]) -> Result<Vec<f64>> {
    if let Some(p) = projectors.iter().find(|p| p.vector.len() != rho.dim()) {
        return Err(TomoError::DimensionMismatch { expected: rho.dim(), got: p.vector.len() });
    }
    Ok(forward_map_matrix(rho.matrix(), projectors))
}

fn forward_map_matrix(rho: &CMatrix, projectors: &[ProjectorBasis]) -> Vec<f64> {
    projectors.iter().map(|p| p.expectation(rho)).collect()
}

/// `Σ_i c_i Q_i Q_i*`.
fn adjoint_map(coeffs: &[f64], projectors: &[ProjectorBasis], dim: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim, dim);
    for (c, p) in coeffs.iter().zip(projectors) {
        if *c == 0.0 {
            continue;
        }
        let v = &p.vector;
        for j in 0..dim {
            let vj = v[j].conj() * *c;
            if vj == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..dim {
                out[(i, j)] += v[i] * vj;
            }
        }
    }
    out
}

/// Largest eigenvalue of `A*A` by power iteration, padded by 1%.
fn operator_norm_sq(projectors: &[ProjectorBasis], dim: usize) -> f64 {
    let mut x = adjoint_map(&vec![1.0; projectors.len()], projectors, dim);
    let mut estimate = 0.0;
    for _ in 0..200 {
        let norm = x.norm();
        if norm == 0.0 {
            return 1.0;
        }
        x.unscale_mut(norm);
        let y = adjoint_map(&forward_map_matrix(&x, projectors), projectors, dim);
        let next = x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        x = y;
        if (next - estimate).abs() <= 1e-12 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate * 1.01
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub best_objective: f64,
    pub feasibility_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl Diagnostics {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,objective,feasibility_gap")?;
        for r in &self.trace {
            writeln!(w, "{},{:e},{:e}", r.iteration, r.objective, r.feasibility_gap)?;
        }
        Ok(())
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn estimate_density_matrix(
    problem: &EstimationProblem,
    config: &SolverConfig,
) -> Result<(DensityMatrix, Diagnostics)> {
    config.validate()?;
    let dim = problem.dim();
    let m = problem.frequencies.len();
    let beta = config.penalty_parameter;
    let step = config.step_size / operator_norm_sq(&problem.projectors, dim);
    let thresholds: Vec<f64> = problem.weights.iter().map(|w| w / beta).collect();
    let objective_of = |r: &[f64]| -> f64 { r.iter().zip(&problem.weights).map(|(r, w)| w * r.abs()).sum() };

    let mut rho = DensityMatrix::maximally_mixed(crate::state::QubitCount::from_dim(dim)?);
    let mut residual: Vec<f64> = forward_map_matrix(rho.matrix(), &problem.projectors)
        .iter()
        .zip(&problem.frequencies)
        .map(|(a, f)| a - f)
        .collect();
    let mut z: Vec<f64> = residual.iter().zip(&thresholds).map(|(r, t)| soft_threshold(*r, *t)).collect();
    let mut u = vec![0.0; m];

    let mut best = rho.clone();
    let mut best_objective = objective_of(&residual);
    let mut previous = best_objective;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut coeffs = vec![0.0; m];

    for it in 1..=config.max_iterations {
        iterations = it;
        for i in 0..m {
            coeffs[i] = residual[i] - z[i] + u[i];
        }
        let grad = adjoint_map(&coeffs, &problem.projectors, dim);
        rho = project_psd_trace_one(&(rho.matrix() - grad.scale(step)))?;

        let forward = forward_map_matrix(rho.matrix(), &problem.projectors);
        let mut gap_sq = 0.0;
        for i in 0..m {
            residual[i] = forward[i] - problem.frequencies[i];
            z[i] = soft_threshold(residual[i] + u[i], thresholds[i]);
            let r = residual[i] - z[i];
            u[i] += r;
            gap_sq += r * r;
        }
        let gap = gap_sq.sqrt();
        let objective = objective_of(&residual);
        if objective < best_objective {
            best_objective = objective;
            best = rho.clone();
        }
        if config.record_trace {
            trace.push(IterationRecord { iteration: it, objective, best_objective, feasibility_gap: gap });
        }
        if (objective - previous).abs() < config.convergence_tolerance
            && gap < config.convergence_tolerance.sqrt()
        {
            converged = true;
            break;
        }
        previous = objective;
    }

    Ok((
        best,
        Diagnostics { iterations, objective: best_objective, converged, trace },
    ))
}
