//! Exact statevector simulation of the `Ry`/CZ hardware-efficient ansatz.

mod circuit;
mod gradient;
mod pauli;
mod state;

use thiserror::Error;

pub use circuit::{run_hea, CircuitSpec, ParamSet};
pub use gradient::{
    analytic_expectation_grad, dense_pauli, expectation_jacobian, param_shift_expectation_grad,
    param_shift_partial, DENSE_MAX_QUBITS,
};
pub use pauli::{expectation, expectations_batch, Pauli, PauliString};
pub use state::{StateVector, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulatorError {
    #[error("register size {0} outside 1..={MAX_QUBITS}")]
    RegisterSize(usize),
    #[error("amplitude count {0} is not a power of two ≥ 2")]
    AmplitudeCount(usize),
    #[error("qubit {qubit} out of range for {eta}-qubit register")]
    QubitIndex { qubit: usize, eta: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("Pauli string length {found} does not match register size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parameter shape mismatch: expected {expected} angles, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("parameter index {index} out of range for {count} angles")]
    ParamIndex { index: usize, count: usize },
    #[error("circuit needs at least one layer")]
    NoLayers,
    #[error("invalid Pauli letter {0:?}")]
    PauliLetter(char),
    #[error("dense construction limited to {DENSE_MAX_QUBITS} qubits, got {0}")]
    DenseLimit(usize),
}
