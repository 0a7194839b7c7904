//! Pauli-correlation encoding bookkeeping: register sizes, two-local
//! observable families, and the pair → observable maps of both estimators.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{Pauli, PauliString};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("need at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error("unsupported locality k = {0} (expected 2 or 3)")]
    UnsupportedLocality(u32),
    #[error("{pairs} pairs exceed the {capacity} two-local observables on {eta} qubits")]
    CapacityExceeded { pairs: usize, capacity: usize, eta: usize },
    #[error("register needs at least 2 qubits, got {0}")]
    RegisterTooSmall(usize),
    #[error("assignment has {found} observables for {expected} pairs")]
    WrongCount { expected: usize, found: usize },
    #[error("observable {index} has length {found}, register has {expected} qubits")]
    WrongLength { index: usize, expected: usize, found: usize },
    #[error("observable {0} must act on exactly two sites")]
    NotTwoLocal(usize),
    #[error("observable {0} is assigned to more than one pair")]
    Duplicate(usize),
}

pub fn binomial2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Register size `max(2, ⌈C(n,2)^{1/k}⌉)`, evaluated in integers.
pub fn eta(n: usize, k: u32) -> Result<usize, EncodingError> {
    if n < 2 {
        return Err(EncodingError::TooFewVariables(n));
    }
    if !(k == 2 || k == 3) {
        return Err(EncodingError::UnsupportedLocality(k));
    }
    let pairs = binomial2(n);
    let mut e = 1usize;
    while e.pow(k) < pairs {
        e += 1;
    }
    Ok(e.max(2))
}

/// Canonical lexicographic order of the pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndexing {
    n: usize,
    order: Vec<(usize, usize)>,
}

impl PairIndexing {
    pub fn new(n: usize) -> Self {
        let order = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self { n, order }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.order
    }

    pub fn pair(&self, r: usize) -> (usize, usize) {
        self.order[r]
    }

    /// Linear index of the unordered pair `{a, b}`, `a ≠ b`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        debug_assert!(i != j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }
}

/// All two-local strings on `eta` qubits: the X sweep over lexicographic
/// site pairs, then the Y sweep, then the Z sweep.
pub fn c_family(eta: usize) -> Result<Vec<PauliString>, EncodingError> {
    if eta < 2 {
        return Err(EncodingError::RegisterTooSmall(eta));
    }
    let sites = PairIndexing::new(eta);
    Ok([Pauli::X, Pauli::Y, Pauli::Z]
        .iter()
        .flat_map(|&letter| {
            sites
                .pairs()
                .iter()
                .map(move |&(a, b)| PauliString::with_sites(eta, &[a, b], letter))
        })
        .collect())
}

/// One JSON record of an assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub r: usize,
    pub i: usize,
    pub j: usize,
    pub letters: String,
}

/// Injective map from pair index to a two-local observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableAssignment {
    pairs: PairIndexing,
    eta: usize,
    observables: Vec<PauliString>,
}

impl ObservableAssignment {
    /// Validates an explicit map; `observables[r]` belongs to pair `r`.
    pub fn new(n: usize, eta: usize, observables: Vec<PauliString>) -> Result<Self, EncodingError> {
        if n < 2 {
            return Err(EncodingError::TooFewVariables(n));
        }
        let expected = binomial2(n);
        if observables.len() != expected {
            return Err(EncodingError::WrongCount {
                expected,
                found: observables.len(),
            });
        }
        let mut seen = HashSet::new();
        for (index, p) in observables.iter().enumerate() {
            if p.len() != eta {
                return Err(EncodingError::WrongLength {
                    index,
                    expected: eta,
                    found: p.len(),
                });
            }
            if p.support().len() != 2 {
                return Err(EncodingError::NotTwoLocal(index));
            }
            if !seen.insert(p.clone()) {
                return Err(EncodingError::Duplicate(index));
            }
        }
        Ok(Self {
            pairs: PairIndexing::new(n),
            eta,
            observables,
        })
    }

    pub fn n(&self) -> usize {
        self.pairs.n()
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn pairs(&self) -> &PairIndexing {
        &self.pairs
    }

    pub fn observables(&self) -> &[PauliString] {
        &self.observables
    }

    pub fn observable(&self, r: usize) -> &PauliString {
        &self.observables[r]
    }

    pub fn records(&self) -> Vec<AssignmentRecord> {
        self.observables
            .iter()
            .enumerate()
            .map(|(r, p)| {
                let (i, j) = self.pairs.pair(r);
                AssignmentRecord {
                    r,
                    i,
                    j,
                    letters: p.to_string(),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("records serialize")
    }
}

/// C-Estimator map: pair `r` takes the `r`-th string of `c_family(eta(n, 2))`.
pub fn c_assignment(n: usize) -> Result<ObservableAssignment, EncodingError> {
    let eta = eta(n, 2)?;
    let family = c_family(eta)?;
    let pairs = binomial2(n);
    if pairs > family.len() {
        return Err(EncodingError::CapacityExceeded {
            pairs,
            capacity: family.len(),
            eta,
        });
    }
    ObservableAssignment::new(n, eta, family.into_iter().take(pairs).collect())
}

/// E-Estimator map on `n` qubits: pair `(i, j)` gets X on sites `i` and `j`.
pub fn e_family(n: usize) -> Result<ObservableAssignment, EncodingError> {
    if n < 2 {
        return Err(EncodingError::TooFewVariables(n));
    }
    let observables = PairIndexing::new(n)
        .pairs()
        .iter()
        .map(|&(i, j)| PauliString::with_sites(n, &[i, j], Pauli::X))
        .collect();
    ObservableAssignment::new(n, n, observables)
}
