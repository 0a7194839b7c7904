//! Derivatives of Pauli expectations with respect to circuit angles.
//!
//! Every generator is `Y/2` (eigenvalues ±1/2), so the two-term shift rule
//! `∂⟨P⟩/∂θ = (⟨P⟩(θ + π/2) − ⟨P⟩(θ − π/2)) / 2` is exact. The dense
//! commutator route `−i·tr(ρ[P, H̃])` is kept as an independent check.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::circuit::apply_layer;
use super::{expectations_batch, CircuitSpec, ParamSet, Pauli, PauliString, SimulatorError, StateVector};

/// Largest register accepted by the dense commutator route.
pub const DENSE_MAX_QUBITS: usize = 6;

/// States before each layer: `prefixes[l]` has layers `0..l` applied.
fn layer_prefixes(spec: &CircuitSpec, params: &ParamSet) -> Result<Vec<StateVector>, SimulatorError> {
    let mut prefixes = Vec::with_capacity(spec.layers);
    let mut state = StateVector::init_zero(spec.eta)?;
    for layer in 0..spec.layers {
        prefixes.push(state.clone());
        apply_layer(&mut state, spec, params, layer, None)?;
    }
    Ok(prefixes)
}

fn shifted_expectations(
    spec: &CircuitSpec,
    params: &ParamSet,
    prefixes: &[StateVector],
    index: usize,
    delta: f64,
    observables: &[PauliString],
) -> Result<Vec<f64>, SimulatorError> {
    let layer = index / spec.eta;
    let qubit = index % spec.eta;
    let mut state = prefixes[layer].clone();
    apply_layer(&mut state, spec, params, layer, Some((qubit, delta)))?;
    for l in layer + 1..spec.layers {
        apply_layer(&mut state, spec, params, l, None)?;
    }
    expectations_batch(&state, observables)
}

fn check_observables(spec: &CircuitSpec, observables: &[PauliString]) -> Result<(), SimulatorError> {
    if let Some(p) = observables.iter().find(|p| p.len() != spec.eta) {
        return Err(SimulatorError::LengthMismatch {
            expected: spec.eta,
            found: p.len(),
        });
    }
    Ok(())
}

fn shift_partial(
    spec: &CircuitSpec,
    params: &ParamSet,
    prefixes: &[StateVector],
    index: usize,
    observables: &[PauliString],
) -> Result<Vec<f64>, SimulatorError> {
    let plus = shifted_expectations(spec, params, prefixes, index, FRAC_PI_2, observables)?;
    let minus = shifted_expectations(spec, params, prefixes, index, -FRAC_PI_2, observables)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
}

/// Shift-rule derivatives of every observable with respect to angle `index`.
pub fn param_shift_partial(
    spec: &CircuitSpec,
    params: &ParamSet,
    observables: &[PauliString],
    index: usize,
) -> Result<Vec<f64>, SimulatorError> {
    params.check(spec)?;
    check_observables(spec, observables)?;
    if index >= spec.num_params() {
        return Err(SimulatorError::ParamIndex {
            index,
            count: spec.num_params(),
        });
    }
    let prefixes = layer_prefixes(spec, params)?;
    shift_partial(spec, params, &prefixes, index, observables)
}

/// `jac[μ][r] = ∂⟨observables[r]⟩/∂θ_μ` by the shift rule, `2·L·η` circuits.
///
/// Shifted circuits are evaluated in parallel, each on its own state copy.
pub fn expectation_jacobian(
    spec: &CircuitSpec,
    params: &ParamSet,
    observables: &[PauliString],
) -> Result<Vec<Vec<f64>>, SimulatorError> {
    params.check(spec)?;
    check_observables(spec, observables)?;
    let prefixes = layer_prefixes(spec, params)?;
    (0..spec.num_params())
        .into_par_iter()
        .map(|mu| shift_partial(spec, params, &prefixes, mu, observables))
        .collect()
}

/// Gradient of a single expectation over all angles, layer-major.
pub fn param_shift_expectation_grad(
    spec: &CircuitSpec,
    params: &ParamSet,
    observable: &PauliString,
) -> Result<Vec<f64>, SimulatorError> {
    let jac = expectation_jacobian(spec, params, std::slice::from_ref(observable))?;
    Ok(jac.into_iter().map(|row| row[0]).collect())
}

type Dense = DMatrix<Complex64>;

fn single_qubit(p: Pauli) -> Dense {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match p {
        Pauli::I => Dense::from_row_slice(2, 2, &[one, z, z, one]),
        Pauli::X => Dense::from_row_slice(2, 2, &[z, one, one, z]),
        Pauli::Y => Dense::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => Dense::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// `M_{η−1} ⊗ ⋯ ⊗ M_0`, matching the least-significant-qubit-0 layout.
fn kron_sites(factors: &[Dense]) -> Dense {
    factors
        .iter()
        .fold(Dense::identity(1, 1), |acc, m| m.kronecker(&acc))
}

pub fn dense_pauli(p: &PauliString) -> Dense {
    let factors: Vec<Dense> = p.letters().iter().map(|&l| single_qubit(l)).collect();
    kron_sites(&factors)
}

fn dense_ry(eta: usize, qubit: usize, angle: f64) -> Dense {
    let (s, c) = (0.5 * angle).sin_cos();
    let rot = Dense::from_row_slice(
        2,
        2,
        &[c, -s, s, c].map(|v| Complex64::new(v, 0.0)),
    );
    let factors: Vec<Dense> = (0..eta)
        .map(|q| if q == qubit { rot.clone() } else { single_qubit(Pauli::I) })
        .collect();
    kron_sites(&factors)
}

fn dense_cz(eta: usize, a: usize, b: usize) -> Dense {
    let dim = 1usize << eta;
    let mask = (1usize << a) | (1usize << b);
    Dense::from_fn(dim, dim, |r, c| {
        if r != c {
            Complex64::new(0.0, 0.0)
        } else if r & mask == mask {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// `∂⟨P⟩/∂θ_which` from `−i·tr(ρ(θ)·[P, H̃])`, with `H̃ = U_after·(Y/2)·U_after†`
/// and `U_after` every gate that follows the rotation in circuit order.
pub fn analytic_expectation_grad(
    spec: &CircuitSpec,
    params: &ParamSet,
    observable: &PauliString,
    which: usize,
) -> Result<f64, SimulatorError> {
    params.check(spec)?;
    check_observables(spec, std::slice::from_ref(observable))?;
    let eta = spec.eta;
    if eta > DENSE_MAX_QUBITS {
        return Err(SimulatorError::DenseLimit(eta));
    }
    if which >= spec.num_params() {
        return Err(SimulatorError::ParamIndex {
            index: which,
            count: spec.num_params(),
        });
    }
    let dim = 1usize << eta;
    let (target_layer, target_qubit) = (which / eta, which % eta);

    // Gate sequence in application order, split at the differentiated rotation.
    let mut before = Dense::identity(dim, dim);
    let mut after = Dense::identity(dim, dim);
    let mut past = false;
    for layer in 0..spec.layers {
        for q in 0..eta {
            let gate = dense_ry(eta, q, params.get(layer, q));
            if past {
                after = &gate * &after;
            } else {
                before = &gate * &before;
            }
            if layer == target_layer && q == target_qubit {
                past = true;
            }
        }
        for (a, b) in spec.ring_edges() {
            let gate = dense_cz(eta, a, b);
            if past {
                after = &gate * &after;
            } else {
                before = &gate * &before;
            }
        }
    }

    let unitary = &after * &before;
    let psi = unitary.column(0).into_owned();
    let rho = &psi * psi.adjoint();
    let generator = dense_pauli(&PauliString::with_sites(eta, &[target_qubit], Pauli::Y))
        .map(|v| v * 0.5);
    let h_tilde = &after * generator * after.adjoint();
    let p = dense_pauli(observable);
    let commutator = &p * &h_tilde - &h_tilde * &p;
    let value = Complex64::new(0.0, -1.0) * (rho * commutator).trace();
    Ok(value.re)
}
