use serde::{Deserialize, Serialize};

use super::{SimulatorError, StateVector};

/// Shape of a hardware-efficient ansatz: `layers` repetitions of an `Ry`
/// column on all `eta` qubits followed by a CZ ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub eta: usize,
    pub layers: usize,
}

impl CircuitSpec {
    pub fn new(eta: usize, layers: usize) -> Result<Self, SimulatorError> {
        if eta == 0 || eta > super::MAX_QUBITS {
            return Err(SimulatorError::RegisterSize(eta));
        }
        if layers == 0 {
            return Err(SimulatorError::NoLayers);
        }
        Ok(Self { eta, layers })
    }

    pub fn num_params(&self) -> usize {
        self.eta * self.layers
    }

    /// Unique ring edges in ascending order: none for one qubit, a single
    /// edge for two, `(i, i+1 mod eta)` otherwise.
    pub fn ring_edges(&self) -> Vec<(usize, usize)> {
        match self.eta {
            1 => Vec::new(),
            2 => vec![(0, 1)],
            eta => (0..eta).map(|i| (i, (i + 1) % eta)).collect(),
        }
    }
}

/// Angles `θ[l][j]` stored layer-major; flat index `l·eta + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    layers: usize,
    eta: usize,
    angles: Vec<f64>,
}

impl ParamSet {
    pub fn new(spec: &CircuitSpec, angles: Vec<f64>) -> Result<Self, SimulatorError> {
        if angles.len() != spec.num_params() {
            return Err(SimulatorError::ShapeMismatch {
                expected: spec.num_params(),
                found: angles.len(),
            });
        }
        Ok(Self {
            layers: spec.layers,
            eta: spec.eta,
            angles,
        })
    }

    pub fn zeros(spec: &CircuitSpec) -> Self {
        Self {
            layers: spec.layers,
            eta: spec.eta,
            angles: vec![0.0; spec.num_params()],
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn index(&self, layer: usize, qubit: usize) -> usize {
        layer * self.eta + qubit
    }

    pub fn get(&self, layer: usize, qubit: usize) -> f64 {
        self.angles[self.index(layer, qubit)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.angles
    }

    /// Copy with angle `index` moved by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.angles[index] += delta;
        out
    }

    pub fn matches(&self, spec: &CircuitSpec) -> bool {
        self.layers == spec.layers && self.eta == spec.eta
    }

    pub(crate) fn check(&self, spec: &CircuitSpec) -> Result<(), SimulatorError> {
        if !self.matches(spec) {
            return Err(SimulatorError::ShapeMismatch {
                expected: spec.num_params(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// Applies layer `layer` (rotations then ring) in place, with `shift` added to
/// the rotation angle of `shift_qubit` when given.
pub(crate) fn apply_layer(
    state: &mut StateVector,
    spec: &CircuitSpec,
    params: &ParamSet,
    layer: usize,
    shift: Option<(usize, f64)>,
) -> Result<(), SimulatorError> {
    for q in 0..spec.eta {
        let mut angle = params.get(layer, q);
        if let Some((sq, delta)) = shift {
            if sq == q {
                angle += delta;
            }
        }
        state.apply_ry(q, angle)?;
    }
    for (a, b) in spec.ring_edges() {
        state.apply_cz(a, b)?;
    }
    Ok(())
}

/// `|ψ(θ)⟩ = U_L ⋯ U_1 |0…0⟩`.
pub fn run_hea(spec: &CircuitSpec, params: &ParamSet) -> Result<StateVector, SimulatorError> {
    params.check(spec)?;
    let mut state = StateVector::init_zero(spec.eta)?;
    for layer in 0..spec.layers {
        apply_layer(&mut state, spec, params, layer, None)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    #[test]
    fn edges() {
        let e = |eta| CircuitSpec::new(eta, 1).unwrap().ring_edges();
        assert!(e(1).is_empty());
        assert_eq!(e(2), vec![(0, 1)]);
        assert_eq!(e(3), vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(e(4).len(), 4);
    }

    #[test]
    fn single_qubit_plus() {
        let spec = CircuitSpec::new(1, 1).unwrap();
        let s = run_hea(&spec, &ParamSet::new(&spec, vec![FRAC_PI_2]).unwrap()).unwrap();
        for a in s.amplitudes() {
            assert!((a - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_angles_leave_ground_state() {
        let spec = CircuitSpec::new(2, 1).unwrap();
        let s = run_hea(&spec, &ParamSet::zeros(&spec)).unwrap();
        assert_eq!(s, StateVector::init_zero(2).unwrap());
    }

    #[test]
    fn shape_checks() {
        let spec = CircuitSpec::new(3, 2).unwrap();
        assert!(ParamSet::new(&spec, vec![0.0; 5]).is_err());
        let other = CircuitSpec::new(2, 3).unwrap();
        assert!(run_hea(&spec, &ParamSet::zeros(&other)).is_err());
        assert!(CircuitSpec::new(0, 1).is_err());
        assert!(CircuitSpec::new(2, 0).is_err());
    }

    #[test]
    fn norm_preserved_through_deep_circuit() {
        let spec = CircuitSpec::new(5, 12).unwrap();
        let angles = (0..spec.num_params()).map(|k| (k as f64 * 0.37).sin() * 3.0).collect();
        let s = run_hea(&spec, &ParamSet::new(&spec, angles).unwrap()).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}
