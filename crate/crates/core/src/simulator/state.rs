use num_complex::Complex64;

use super::SimulatorError;

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Pure state of an `eta`-qubit register.
///
/// Basis index bit `q` is the value of qubit `q`, so qubit 0 is the least
/// significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    eta: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `eta` qubits.
    pub fn init_zero(eta: usize) -> Result<Self, SimulatorError> {
        if eta == 0 || eta > MAX_QUBITS {
            return Err(SimulatorError::RegisterSize(eta));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << eta];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { eta, amplitudes })
    }

    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimulatorError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(SimulatorError::AmplitudeCount(len));
        }
        let eta = len.trailing_zeros() as usize;
        if eta > MAX_QUBITS {
            return Err(SimulatorError::RegisterSize(eta));
        }
        Ok(Self { eta, amplitudes })
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), SimulatorError> {
        if qubit >= self.eta {
            return Err(SimulatorError::QubitIndex {
                qubit,
                eta: self.eta,
            });
        }
        Ok(())
    }

    /// `Ry(angle) = exp(-i·angle·Y/2)` on `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<(), SimulatorError> {
        self.check_qubit(qubit)?;
        let (s, c) = (0.5 * angle).sin_cos();
        let stride = 1usize << qubit;
        for base in (0..self.amplitudes.len()).step_by(stride << 1) {
            for i0 in base..base + stride {
                let i1 = i0 | stride;
                let a0 = self.amplitudes[i0];
                let a1 = self.amplitudes[i1];
                self.amplitudes[i0] = a0 * c - a1 * s;
                self.amplitudes[i1] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    /// Controlled-Z between two distinct qubits.
    pub fn apply_cz(&mut self, q1: usize, q2: usize) -> Result<(), SimulatorError> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(SimulatorError::SameQubit(q1));
        }
        let mask = (1usize << q1) | (1usize << q2);
        for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64, SimulatorError> {
        if self.eta != other.eta {
            return Err(SimulatorError::LengthMismatch {
                expected: self.eta,
                found: other.eta,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}
