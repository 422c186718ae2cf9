//! Multi-step adaptive quantum state tomography.
//!
//! Pauli projectors are stored as lifted vectors `Q` (`M = QQ*`), the density
//! matrix is estimated by an L1 fit over the set of density matrices, and
//! later measurement rounds are steered by a minimal-L1 decomposition of the
//! previous estimate.

pub mod error;
pub mod estimator;
pub mod linalg;
pub mod matrix_io;
pub mod measurement;
pub mod metrics;
pub mod pauli;
pub mod pipeline;
pub mod projection;
pub mod selection;
pub mod state;

pub use error::{Result, TomoError};
pub use estimator::{estimate_density_matrix, forward_map, Diagnostics, EstimationProblem, SolverConfig};
pub use linalg::{hermitian_eig, CMatrix, CVector, EigenDecomposition, C64};
pub use measurement::{measure_round, simulate_counts, CountTable, FrequencyTable, FrequencyVariant, RngSeed, RoundStream};
pub use metrics::{mse, trace_distance};
pub use pauli::{born_probabilities, dictionary, enumerate_settings, projector, PauliAxis, PauliSetting, ProjectorBasis};
pub use pipeline::{combine_three_step, combine_two_step, Experiment, ExperimentPlan, Method, RunResult, StateSpec};
pub use projection::{project_psd_trace_one, project_simplex};
pub use selection::{allocate_copies, decompose_l1, setting_weights, uniform_allocation, AllocationVector, CoefficientVector, SelectionConfig};
pub use state::{cat_state, noon_state, random_density_matrix, w_state, DensityMatrix, PureState, QubitCount};
