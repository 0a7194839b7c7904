use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SimulatorError, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Self> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Tensor product of single-qubit Paulis; `letters[q]` acts on qubit `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(len: usize) -> Self {
        Self::new(vec![Pauli::I; len])
    }

    /// Identity except for `letter` at each of `sites`.
    pub fn with_sites(len: usize, sites: &[usize], letter: Pauli) -> Self {
        let mut letters = vec![Pauli::I; len];
        for &s in sites {
            letters[s] = letter;
        }
        Self::new(letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Sites carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn is_traceless(&self) -> bool {
        self.letters.iter().any(|&p| p != Pauli::I)
    }

    /// Two Pauli strings commute iff they anticommute on an even number of sites.
    pub fn commutes_with(&self, other: &Self) -> bool {
        let clashes = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        clashes % 2 == 0
    }

    fn masks(&self) -> (usize, usize, usize) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut n_y = 0usize;
        for (q, &p) in self.letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    phase |= 1 << q;
                    n_y += 1;
                }
                Pauli::Z => phase |= 1 << q,
            }
        }
        (flip, phase, n_y)
    }

    /// Raw `⟨ψ|P|ψ⟩` including its (ideally zero) imaginary part.
    ///
    /// `P|k⟩ = i^{#Y}·(−1)^{|k ∧ (Y∨Z)|}·|k ⊕ (X∨Y)⟩`, summed in one pass.
    pub fn expectation_complex(&self, state: &StateVector) -> Result<Complex64, SimulatorError> {
        if self.len() != state.eta() {
            return Err(SimulatorError::LengthMismatch {
                expected: state.eta(),
                found: self.len(),
            });
        }
        let (flip, phase, n_y) = self.masks();
        let amps = state.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &a) in amps.iter().enumerate() {
            let term = amps[k ^ flip].conj() * a;
            if (k & phase).count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let global = match n_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Ok(acc * global)
    }

    /// `P|ψ⟩` as a new state.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector, SimulatorError> {
        if self.len() != state.eta() {
            return Err(SimulatorError::LengthMismatch {
                expected: state.eta(),
                found: self.len(),
            });
        }
        let (flip, phase, n_y) = self.masks();
        let global = Complex64::i().powu(n_y as u32);
        let amps = state.amplitudes();
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (k, &a) in amps.iter().enumerate() {
            let sign = if (k & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[k ^ flip] = a * global * sign;
        }
        StateVector::from_amplitudes(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = SimulatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|ch| Pauli::from_symbol(ch).ok_or(SimulatorError::PauliLetter(ch)))
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }
}

impl TryFrom<String> for PauliString {
    type Error = SimulatorError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> Self {
        p.to_string()
    }
}

/// `⟨ψ|P|ψ⟩`, real for Hermitian `P`.
pub fn expectation(state: &StateVector, observable: &PauliString) -> Result<f64, SimulatorError> {
    let z = observable.expectation_complex(state)?;
    debug_assert!(z.im.abs() <= 1e-12, "imaginary part {}", z.im);
    Ok(z.re)
}

/// Elementwise [`expectation`] over a list of observables.
pub fn expectations_batch(state: &StateVector, observables: &[PauliString]) -> Result<Vec<f64>, SimulatorError> {
    observables.iter().map(|p| expectation(state, p)).collect()
}
