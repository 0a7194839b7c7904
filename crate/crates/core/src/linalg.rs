//! Dense symmetric linear algebra used by the estimators and their tests.
//!
//! Matrices are small (n ≤ 64) and stored row-major in plain `Vec<f64>`.
//! Everything here is a pure function of its inputs and, where random, of a
//! `u64` seed routed through [`SeededRng`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// Pivot and diagonal magnitude below which a factor is treated as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("triangular factor is singular: diagonal {index} is {value:e}")]
    SingularFactor { index: usize, value: f64 },
    #[error("entry ({i}, {j}) above the diagonal is nonzero")]
    NotLowerTriangular { i: usize, j: usize },
    #[error("negative diagonal {index} in triangular factor")]
    NegativeDiagonal { index: usize },
    #[error("rank {rank} outside 1..={n}")]
    InvalidRank { rank: usize, n: usize },
    #[error("invalid eigenvalue range [{min}, {max}]")]
    InvalidEigenRange { min: f64, max: f64 },
    #[error("missing fraction {0} outside [0, 1)")]
    InvalidFraction(f64),
    #[error("invalid mask pair ({i}, {j}) for dimension {n}")]
    InvalidMaskPair { i: usize, j: usize, n: usize },
    #[error("duplicate mask pair ({i}, {j})")]
    DuplicateMaskPair { i: usize, j: usize },
}

/// Dense `n × n` real symmetric matrix, stored with both triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymmetricMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Result<Self, LinalgError> {
        if n < 2 {
            return Err(LinalgError::TooSmall(n));
        }
        Ok(Self {
            n,
            entries: vec![0.0; n * n],
        })
    }

    pub fn identity(n: usize) -> Result<Self, LinalgError> {
        Self::diagonal_from(&vec![1.0; n])
    }

    pub fn diagonal_from(diag: &[f64]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        Ok(m)
    }

    /// Builds the matrix from the lower triangle `f(i, j)`, `j <= i`, mirrored upward.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    /// Rows must be square and exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut m = Self::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            m.entries[i * n..(i + 1) * n].copy_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(LinalgError::NotSymmetric { i, j });
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets entry `(i, j)` and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        check_dims(self.n, other.n)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymmetricMatrix {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<SymmetricMatrix> for Vec<Vec<f64>> {
    fn from(m: SymmetricMatrix) -> Self {
        m.to_rows()
    }
}

/// Lower-triangular factor with a non-negative diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LowerTriangular {
    n: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut l = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            l.set(i, i, d);
        }
        l
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut l = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if j > i && v != 0.0 {
                    return Err(LinalgError::NotLowerTriangular { i, j });
                }
                if j == i && v < 0.0 {
                    return Err(LinalgError::NegativeDiagonal { index: i });
                }
                l.entries[i * n + j] = v;
            }
        }
        Ok(l)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets entry `(i, j)`; panics if `j > i`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(j <= i, "({i}, {j}) is above the diagonal");
        self.entries[i * self.n + j] = value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.entries[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// `L·Lᵀ`, exactly symmetric. Panics for `n < 2`.
    pub fn gram(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_lower_fn(self.n, |i, j| {
            (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum()
        })
        .expect("factor dimension below 2")
    }
}

impl TryFrom<Vec<Vec<f64>>> for LowerTriangular {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<LowerTriangular> for Vec<Vec<f64>> {
    fn from(l: LowerTriangular) -> Self {
        l.to_rows()
    }
}

/// Observed off-diagonal pairs `(i, j)` with `j < i`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMask {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl ObservationMask {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize)> = pairs.into_iter().collect();
        for &(i, j) in &sorted {
            if i >= n || j >= i {
                return Err(LinalgError::InvalidMaskPair { i, j, n });
            }
        }
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            let (i, j) = w[0];
            return Err(LinalgError::DuplicateMaskPair { i, j });
        }
        Ok(Self { n, pairs: sorted })
    }

    /// Every off-diagonal pair observed.
    pub fn full(n: usize) -> Self {
        let pairs = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() == self.n * (self.n - 1) / 2
    }

    /// Order-insensitive membership test.
    pub fn contains(&self, a: usize, b: usize) -> bool {
        let key = if a > b { (a, b) } else { (b, a) };
        self.pairs.binary_search(&key).is_ok()
    }
}

fn check_dims(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected != found {
        return Err(LinalgError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.normal()).collect()
}

/// `A·Aᵀ` for `A` an `n × n` standard-normal matrix.
pub fn random_psd(n: usize, seed: u64) -> Result<SymmetricMatrix, LinalgError> {
    if n < 2 {
        return Err(LinalgError::TooSmall(n));
    }
    gram_of_rows(n, n, seed)
}

/// `B·Bᵀ` for `B` an `n × r` standard-normal matrix.
pub fn random_lowrank_psd(n: usize, rank: usize, seed: u64) -> Result<SymmetricMatrix, LinalgError> {
    if n < 2 {
        return Err(LinalgError::TooSmall(n));
    }
    if rank == 0 || rank > n {
        return Err(LinalgError::InvalidRank { rank, n });
    }
    gram_of_rows(n, rank, seed)
}

fn gram_of_rows(n: usize, cols: usize, seed: u64) -> Result<SymmetricMatrix, LinalgError> {
    let mut rng = SeededRng::new(seed);
    let a = gaussian_matrix(n, cols, &mut rng);
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        (0..cols).map(|k| a[i * cols + k] * a[j * cols + k]).sum()
    })
}

/// Orthogonal `n × n` matrix (row-major) from modified Gram–Schmidt on a
/// Gaussian matrix. MGS yields a positive `R` diagonal, which is the sign
/// normalization that makes `Q` Haar distributed.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
    for k in 0..n {
        for p in 0..k {
            let dot: f64 = (0..n).map(|t| cols[k][t] * cols[p][t]).sum();
            for t in 0..n {
                cols[k][t] -= dot * cols[p][t];
            }
        }
        let norm = cols[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut cols[k] {
            *v /= norm;
        }
    }
    let mut q = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q[i * n + j] = v;
        }
    }
    q
}

/// `U·Λ·Uᵀ` with `n` eigenvalues log-spaced from `eig_max` down to `eig_min`.
pub fn random_near_singular(
    n: usize,
    eig_min: f64,
    eig_max: f64,
    seed: u64,
) -> Result<SymmetricMatrix, LinalgError> {
    if n < 2 {
        return Err(LinalgError::TooSmall(n));
    }
    if !(eig_min > 0.0 && eig_min <= eig_max && eig_max.is_finite()) {
        return Err(LinalgError::InvalidEigenRange {
            min: eig_min,
            max: eig_max,
        });
    }
    let ratio = eig_min / eig_max;
    let eigs: Vec<f64> = (0..n)
        .map(|k| eig_max * ratio.powf(k as f64 / (n - 1) as f64))
        .collect();
    let mut rng = SeededRng::new(seed);
    let u = random_orthogonal(n, &mut rng);
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        (0..n).map(|k| u[i * n + k] * eigs[k] * u[j * n + k]).sum()
    })
}

/// Plain Cholesky–Banachiewicz factorization.
pub fn reference_cholesky(s: &SymmetricMatrix) -> Result<LowerTriangular, LinalgError> {
    let n = s.n();
    let mut l = LowerTriangular::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let partial: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
            if i == j {
                let pivot = s.get(i, i) - partial;
                if !(pivot >= SINGULAR_TOLERANCE) {
                    return Err(LinalgError::NotPositiveDefinite { pivot: i, value: pivot });
                }
                l.set(i, i, pivot.sqrt());
            } else {
                l.set(i, j, (s.get(i, j) - partial) / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `L·x = b`, or `Lᵀ·x = b` when `transposed`, by substitution.
pub fn solve_triangular(l: &LowerTriangular, b: &[f64], transposed: bool) -> Result<Vec<f64>, LinalgError> {
    let n = l.n();
    check_dims(n, b.len())?;
    for i in 0..n {
        let d = l.get(i, i);
        if !(d.abs() >= SINGULAR_TOLERANCE) {
            return Err(LinalgError::SingularFactor { index: i, value: d });
        }
    }
    let mut x = vec![0.0; n];
    if transposed {
        for i in (0..n).rev() {
            let tail: f64 = (i + 1..n).map(|k| l.get(k, i) * x[k]).sum();
            x[i] = (b[i] - tail) / l.get(i, i);
        }
    } else {
        for i in 0..n {
            let head: f64 = (0..i).map(|k| l.get(i, k) * x[k]).sum();
            x[i] = (b[i] - head) / l.get(i, i);
        }
    }
    Ok(x)
}

/// `(L·Lᵀ)⁻¹` assembled column by column from `L·y = eᵢ`, `Lᵀ·x = y`.
pub fn precision_from_factor(l: &LowerTriangular) -> Result<SymmetricMatrix, LinalgError> {
    let n = l.n();
    let mut columns = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let y = solve_triangular(l, &e, false)?;
        columns.push(solve_triangular(l, &y, true)?);
    }
    // The exact inverse is symmetric; average the two computed triangles.
    SymmetricMatrix::from_lower_fn(n, |i, j| 0.5 * (columns[j][i] + columns[i][j]))
}

/// All eigenvalues in ascending order via cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(s: &SymmetricMatrix) -> Vec<f64> {
    let n = s.n();
    let mut a = s.as_slice().to_vec();
    let threshold = 1e-12 * s.frobenius_norm();
    let off_norm = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[i * n + j] * a[i * n + j];
                }
            }
        }
        acc.sqrt()
    };

    for _sweep in 0..100 {
        if off_norm(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.total_cmp(y));
    eigs
}

/// Mean absolute entrywise difference over all `n²` entries.
pub fn mae(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64, LinalgError> {
    check_dims(a.n(), b.n())?;
    let total: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(total / (a.n() * a.n()) as f64)
}

/// Observed set of `round((1 - missing_fraction)·C(n,2))` off-diagonal pairs.
///
/// Pairs are taken as a prefix of one seeded permutation, so for a fixed
/// seed the observed sets are nested: a larger missing fraction only ever
/// removes pairs.
pub fn random_mask(n: usize, missing_fraction: f64, seed: u64) -> Result<ObservationMask, LinalgError> {
    if n < 2 {
        return Err(LinalgError::TooSmall(n));
    }
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(LinalgError::InvalidFraction(missing_fraction));
    }
    let mut all: Vec<(usize, usize)> = ObservationMask::full(n).pairs;
    let keep = ((1.0 - missing_fraction) * all.len() as f64).round() as usize;
    let mut rng = SeededRng::new(seed);
    rng.shuffle(&mut all);
    all.truncate(keep);
    ObservationMask::new(n, all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(SymmetricMatrix::zeros(1), Err(LinalgError::TooSmall(1)));
        let asym = vec![vec![1.0, 2.0], vec![2.5, 1.0]];
        assert!(matches!(
            SymmetricMatrix::from_rows(&asym),
            Err(LinalgError::NotSymmetric { .. })
        ));
        let upper = vec![vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!(LowerTriangular::from_rows(&upper).is_err());
    }

    #[test]
    fn random_psd_is_deterministic_and_psd() {
        let a = random_psd(6, 99).unwrap();
        let b = random_psd(6, 99).unwrap();
        assert_eq!(a, b);
        let small = random_psd(2, 5).unwrap();
        assert!(jacobi_eigenvalues(&small)[0] >= -1e-12);
    }

    #[test]
    fn lowrank_shapes() {
        let m = random_lowrank_psd(6, 2, 3).unwrap();
        let eigs = jacobi_eigenvalues(&m);
        assert_eq!(eigs.iter().filter(|&&e| e > 1e-10).count(), 2);

        let full = random_lowrank_psd(4, 4, 3).unwrap();
        assert!(jacobi_eigenvalues(&full)[0] > 1e-10);

        let r1 = random_lowrank_psd(3, 1, 8).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let minor = r1.get(i, k) * r1.get(j, l) - r1.get(i, l) * r1.get(j, k);
                        assert!(minor.abs() <= 1e-12 * (1.0 + r1.frobenius_norm().powi(2)));
                    }
                }
            }
        }
        assert_eq!(
            random_lowrank_psd(3, 0, 1),
            Err(LinalgError::InvalidRank { rank: 0, n: 3 })
        );
        assert!(random_lowrank_psd(3, 4, 1).is_err());
    }

    #[test]
    fn near_singular_spectrum() {
        let m = random_near_singular(5, 1e-4, 1.0, 17).unwrap();
        let eigs = jacobi_eigenvalues(&m);
        let cond = eigs[4] / eigs[0];
        assert!((cond / 1e4 - 1.0).abs() < 0.01, "cond {cond}");

        let id = random_near_singular(2, 1.0, 1.0, 17).unwrap();
        assert!(id.max_abs_diff(&SymmetricMatrix::identity(2).unwrap()).unwrap() <= 1e-12);

        let m4 = random_near_singular(4, 1e-4, 1.0, 23).unwrap();
        assert_abs_diff_eq!(jacobi_eigenvalues(&m4)[0], 1e-4, epsilon = 1e-10);

        assert!(random_near_singular(3, 0.0, 1.0, 1).is_err());
        assert!(random_near_singular(3, 2.0, 1.0, 1).is_err());
    }

    #[test]
    fn cholesky_closed_forms() {
        let l = reference_cholesky(&sym(&[&[4.0, 0.0], &[0.0, 9.0]])).unwrap();
        assert_eq!(l.diagonal(), vec![2.0, 3.0]);
        assert_eq!(l.get(1, 0), 0.0);

        let l = reference_cholesky(&sym(&[&[1.0, 0.5], &[0.5, 1.0]])).unwrap();
        assert_abs_diff_eq!(l.get(0, 0), 1.0);
        assert_abs_diff_eq!(l.get(1, 0), 0.5);
        assert_abs_diff_eq!(l.get(1, 1), 0.75f64.sqrt(), epsilon = 1e-15);

        let s = random_psd(5, 4).unwrap();
        let l = reference_cholesky(&s).unwrap();
        assert!(l.gram().max_abs_diff(&s).unwrap() <= 1e-10);
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let s = sym(&[&[1.0, 1.0], &[1.0, 1.0]]);
        match reference_cholesky(&s) {
            Err(LinalgError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn triangular_solves() {
        let l = LowerTriangular::from_diagonal(&[2.0, 3.0]);
        assert_eq!(solve_triangular(&l, &[2.0, 3.0], false).unwrap(), vec![1.0, 1.0]);

        let l = LowerTriangular::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(solve_triangular(&l, &[1.0, 2.0], false).unwrap(), vec![1.0, 1.0]);
        // Lᵀ = [[1,1],[0,1]]: x = (−1, 2) solves Lᵀx = (1, 2).
        assert_eq!(solve_triangular(&l, &[1.0, 2.0], true).unwrap(), vec![-1.0, 2.0]);

        let singular = LowerTriangular::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            solve_triangular(&singular, &[1.0, 1.0], false),
            Err(LinalgError::SingularFactor { index: 1, .. })
        ));
        assert!(solve_triangular(&l, &[1.0], false).is_err());
    }

    #[test]
    fn precision_closed_forms() {
        let p = precision_from_factor(&LowerTriangular::from_diagonal(&[2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), 0.25);
        assert_abs_diff_eq!(p.get(1, 1), 1.0 / 9.0);
        assert_eq!(p.get(0, 1), 0.0);

        let p = precision_from_factor(&LowerTriangular::identity(3)).unwrap();
        assert_eq!(p, SymmetricMatrix::identity(3).unwrap());
    }

    #[test]
    fn jacobi_closed_forms() {
        let d = sym(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        assert_eq!(jacobi_eigenvalues(&d), vec![1.0, 2.0, 3.0]);
        let x = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = jacobi_eigenvalues(&x);
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-14);
        let z = SymmetricMatrix::zeros(3).unwrap();
        assert_eq!(jacobi_eigenvalues(&z), vec![0.0; 3]);
    }

    #[test]
    fn mae_values() {
        let a = random_psd(4, 1).unwrap();
        let b = random_psd(4, 2).unwrap();
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let id = SymmetricMatrix::identity(2).unwrap();
        let zero = SymmetricMatrix::zeros(2).unwrap();
        assert_eq!(mae(&id, &zero).unwrap(), 0.5);
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        assert!(mae(&a, &id).is_err());
    }

    #[test]
    fn mask_sizes_and_determinism() {
        assert_eq!(random_mask(5, 0.0, 1).unwrap().len(), 10);
        assert_eq!(random_mask(5, 0.5, 1).unwrap().len(), 5);
        assert_eq!(random_mask(6, 0.3, 9).unwrap(), random_mask(6, 0.3, 9).unwrap());
        assert!(random_mask(5, 1.0, 1).is_err());
        assert!(random_mask(5, -0.1, 1).is_err());

        let small = random_mask(6, 0.5, 4).unwrap();
        let large = random_mask(6, 0.1, 4).unwrap();
        assert!(small.pairs().iter().all(|&(i, j)| large.contains(i, j)));
    }

    #[test]
    fn mask_validation() {
        assert!(ObservationMask::new(3, [(1, 1)]).is_err());
        assert!(ObservationMask::new(3, [(0, 1)]).is_err());
        assert!(ObservationMask::new(3, [(3, 1)]).is_err());
        assert!(ObservationMask::new(3, [(2, 1), (2, 1)]).is_err());
        let m = ObservationMask::new(3, [(2, 0), (1, 0)]).unwrap();
        assert_eq!(m.pairs(), &[(1, 0), (2, 0)]);
        assert!(m.contains(0, 2));
        assert!(!m.contains(2, 1));
        assert!(ObservationMask::full(4).is_full());
    }
}
