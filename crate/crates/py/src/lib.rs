//! Python bindings: states, Born probabilities, the L1 estimator, setting
//! selection and full experiment runs.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tomolift::pipeline::StateSpec;
use tomolift::{CMatrix, EstimationProblem, Experiment, ExperimentPlan, Method, QubitCount, RngSeed, TomoError};

fn err(e: TomoError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn qubits(n: usize) -> PyResult<QubitCount> {
    QubitCount::new(n).map_err(err)
}

/// A validated density matrix.
#[pyclass(name = "DensityMatrix", module = "tomolift", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: tomolift::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Builds from a list of rows of complex numbers; rejects matrices that
    /// are not Hermitian, positive semidefinite and unit trace.
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let m = CMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Ok(Self { inner: tomolift::DensityMatrix::new(m).map_err(err)? })
    }

    #[staticmethod]
    fn cat(n: usize) -> PyResult<Self> {
        Ok(Self { inner: tomolift::cat_state(qubits(n)?) })
    }

    #[staticmethod]
    fn noon(n: usize) -> PyResult<Self> {
        Ok(Self { inner: tomolift::noon_state(qubits(n)?).map_err(err)? })
    }

    #[staticmethod]
    fn w(n: usize) -> PyResult<Self> {
        Ok(Self { inner: tomolift::w_state(qubits(n)?).map_err(err)? })
    }

    #[staticmethod]
    fn maximally_mixed(n: usize) -> PyResult<Self> {
        Ok(Self { inner: tomolift::DensityMatrix::maximally_mixed(qubits(n)?) })
    }

    #[staticmethod]
    #[pyo3(signature = (n, rank, seed=0))]
    fn random(n: usize, rank: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: tomolift::random_density_matrix(qubits(n)?, rank, seed).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self { inner: tomolift::matrix_io::load_density_matrix(path).map_err(err)? })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        tomolift::matrix_io::save_matrix(path, self.inner.matrix()).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits().get()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(qubits={}, purity={:.6})", self.qubits(), self.purity())
    }
}

/// Outcome probabilities of Pauli setting `setting` (0-based, qubit 0 most
/// significant, X < Y < Z).
#[pyfunction]
fn born_probabilities(rho: &PyDensityMatrix, setting: usize) -> PyResult<Vec<f64>> {
    let s = tomolift::PauliSetting::from_index(rho.inner.qubits(), setting).map_err(err)?;
    tomolift::born_probabilities(&rho.inner, &s).map_err(err)
}

/// Exact outcome probabilities for every setting, one row per setting.
#[pyfunction]
fn predicted_frequencies(rho: &PyDensityMatrix) -> PyResult<Vec<Vec<f64>>> {
    Ok(tomolift::FrequencyTable::predicted(&rho.inner).map_err(err)?.rows)
}

/// Fits a density matrix to a full table of frequencies (`3ⁿ` rows of `2ⁿ`).
/// Returns the estimate and a dict of solver diagnostics.
#[pyfunction]
#[pyo3(signature = (frequencies, max_iterations=5000, convergence_tolerance=1e-10))]
fn estimate<'py>(
    py: Python<'py>,
    frequencies: Vec<Vec<f64>>,
    max_iterations: usize,
    convergence_tolerance: f64,
) -> PyResult<(PyDensityMatrix, Bound<'py, PyDict>)> {
    let n = QubitCount::from_dim(frequencies.first().map_or(0, Vec::len)).map_err(err)?;
    if frequencies.len() != n.settings() {
        return Err(PyValueError::new_err(format!("expected {} rows, got {}", n.settings(), frequencies.len())));
    }
    let table = tomolift::FrequencyTable { variant: tomolift::FrequencyVariant::Measured, rows: frequencies };
    let problem = EstimationProblem::from_table(&tomolift::dictionary(n), &table).map_err(err)?;
    let config = tomolift::SolverConfig { max_iterations, convergence_tolerance, ..Default::default() };
    let (rho, diag) = py.detach(|| tomolift::estimate_density_matrix(&problem, &config)).map_err(err)?;
    let info = PyDict::new(py);
    info.set_item("iterations", diag.iterations)?;
    info.set_item("objective", diag.objective)?;
    info.set_item("converged", diag.converged)?;
    Ok((PyDensityMatrix { inner: rho }, info))
}

/// Minimal-L1 coefficients over the projector dictionary, in (setting, outcome) order.
#[pyfunction]
fn decompose(rho: &PyDensityMatrix) -> PyResult<Vec<f64>> {
    let dict = tomolift::dictionary(rho.inner.qubits());
    let s = tomolift::decompose_l1(&rho.inner, &dict, &Default::default()).map_err(err)?;
    Ok(s.entries)
}

/// Normalized per-setting weights from the minimal-L1 decomposition.
#[pyfunction]
fn setting_weights(rho: &PyDensityMatrix) -> PyResult<Vec<f64>> {
    let dict = tomolift::dictionary(rho.inner.qubits());
    let s = tomolift::decompose_l1(&rho.inner, &dict, &Default::default()).map_err(err)?;
    tomolift::setting_weights(&s).map_err(err)
}

/// Largest-remainder split of `budget` copies in proportion to `weights`.
#[pyfunction]
fn allocate(weights: Vec<f64>, budget: u64) -> PyResult<Vec<u64>> {
    Ok(tomolift::allocate_copies(&weights, budget).map_err(err)?.counts().to_vec())
}

/// Per-entry mean squared error `‖a − b‖²_F / 4ⁿ`.
#[pyfunction]
fn mse(a: &PyDensityMatrix, b: &PyDensityMatrix) -> PyResult<f64> {
    tomolift::mse(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn trace_distance(a: &PyDensityMatrix, b: &PyDensityMatrix) -> PyResult<f64> {
    tomolift::trace_distance(&a.inner, &b.inner).map_err(err)
}

fn parse_state(name: &str, rank: Option<usize>, state_seed: u64) -> PyResult<StateSpec> {
    Ok(match name {
        "cat" => StateSpec::Cat,
        "noon" => StateSpec::Noon,
        "w" => StateSpec::W,
        "mixed" => StateSpec::MaximallyMixed,
        "random" => StateSpec::Random {
            rank: rank.ok_or_else(|| PyValueError::new_err("random state needs rank"))?,
            seed: state_seed,
        },
        other => return Err(PyValueError::new_err(format!("unknown state `{other}`"))),
    })
}

/// Runs one tomography experiment and returns a dict with the final
/// estimate, error metrics, per-round allocations and copies consumed.
#[pyfunction]
#[pyo3(signature = (
    state, n, copies, method="two_step", r=0.5, r2=0.0, seed=0, trial=0,
    rank=None, state_seed=0, oracle=false, eq10_alt=false
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    state: &str,
    n: usize,
    copies: u64,
    method: &str,
    r: f64,
    r2: f64,
    seed: u64,
    trial: u64,
    rank: Option<usize>,
    state_seed: u64,
    oracle: bool,
    eq10_alt: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(err)?;
    let mut plan = ExperimentPlan::new(qubits(n)?, parse_state(state, rank, state_seed)?, copies, method);
    plan.r = r;
    plan.r2 = r2;
    plan.seed = RngSeed(seed);
    plan.oracle = oracle;
    plan.eq10_alt = eq10_alt;
    let result = py.detach(|| Experiment::new(plan).and_then(|e| e.run(trial))).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("method", result.method.as_str())?;
    out.set_item("mse", result.mse)?;
    out.set_item("frobenius_sq", result.frobenius_sq)?;
    out.set_item("trace_distance", result.trace_distance)?;
    out.set_item("copies_consumed", result.copies_consumed)?;
    out.set_item("iterations", result.total_iterations())?;
    let allocations: Vec<Vec<u64>> = result.rounds.iter().map(|r| r.allocation.counts().to_vec()).collect();
    out.set_item("allocations", allocations)?;
    out.set_item("estimate", PyDensityMatrix { inner: result.final_stage().estimate.clone() })?;
    Ok(out)
}

/// Multi-step adaptive quantum state tomography.
#[pymodule(name = "tomolift")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_function(wrap_pyfunction!(born_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(setting_weights, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
