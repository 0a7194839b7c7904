//! Covariance estimation with variational quantum circuits under
//! continuous Pauli-correlation encoding.
//!
//! Off-diagonal covariance entries are scaled Pauli expectations
//! `c_ij·⟨Π_ij⟩` on the output of a hardware-efficient `Ry`/CZ ansatz,
//! simulated exactly. Two estimators are provided: a Cholesky form that is
//! positive semidefinite for every circuit output, and a direct-entry form
//! that is PSD under a diagonal-dominance condition on `c`.

pub mod encoding;
pub mod estimators;
pub mod format;
pub mod linalg;
pub mod optimizer;
pub mod plateau;
pub mod rng;
pub mod simulator;

pub use encoding::{c_assignment, e_family, eta, ObservableAssignment, PairIndexing};
pub use estimators::{
    complete, estimate, CSchedule, CovarianceModel, EstimateResult, EstimatorError, EstimatorKind,
    EstimatorProblem, RegularizationParams,
};
pub use linalg::{LinalgError, LowerTriangular, ObservationMask, SymmetricMatrix};
pub use optimizer::{minimize, multi_run, Algorithm, OptimizerConfig, OptimizerError, Trace};
pub use plateau::{LayerRule, VarianceReport, VarianceSweepConfig};
pub use rng::SeededRng;
pub use simulator::{CircuitSpec, ParamSet, Pauli, PauliString, SimulatorError, StateVector};
