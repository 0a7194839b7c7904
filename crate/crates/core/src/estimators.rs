//! Covariance estimators driven by circuit expectations.
//!
//! * **C-Estimator**: `Σ̂ = L·Lᵀ` with `L[i][j] = c_ji·x_ji` below the
//!   diagonal and `λᵢ = sqrt(Var(Xᵢ) − Σ_l c_li²·x_li²)` on it. PSD for any
//!   circuit output; negative radicands are clamped to zero and reported.
//! * **E-Estimator**: `Σ̂_ij = c_ij·⟨X_i X_j⟩` on an `n`-qubit register,
//!   `Σ̂_ii = Var(Xᵢ)`. PSD whenever each row's `c` sum is at most its variance.
//!
//! Pair-indexed vectors (`x`, `c`) follow [`PairIndexing`] order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, binomial2, EncodingError, ObservableAssignment, PairIndexing};
use crate::linalg::{self, LinalgError, LowerTriangular, ObservationMask, SymmetricMatrix};
use crate::optimizer::{self, Evaluation, Objective, OptimizerConfig, OptimizerError, Trace};
use crate::simulator::{
    expectation_jacobian, expectations_batch, param_shift_partial, run_hea, CircuitSpec, ParamSet,
    SimulatorError,
};

/// Weight of the rank-`r` penalty on variance the kept columns leave
/// unexplained, `Σ_{i≥r} max(0, Var(Xᵢ) − Σ_{l<r} L_il²)`.
pub const LOWRANK_PENALTY: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("regularization parameters: {0}")]
    InvalidRegularization(String),
    #[error("variance {index} is negative ({value})")]
    NegativeVariance { index: usize, value: f64 },
    #[error("{what}: expected {expected}, found {found}")]
    Mismatch { what: &'static str, expected: usize, found: usize },
    #[error("rank target {rank} outside 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("rank targets apply to the C-Estimator only")]
    RankNeedsCholesky,
    #[error("completion needs a non-empty observation mask")]
    EmptyMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    C,
    E,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::C => "c",
            EstimatorKind::E => "e",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" => Ok(EstimatorKind::C),
            "e" => Ok(EstimatorKind::E),
            other => Err(format!("unknown estimator kind {other:?} (expected c or e)")),
        }
    }
}

/// Non-negative `c_ij`, one per pair `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    n: usize,
    values: Vec<f64>,
}

impl RegularizationParams {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, EstimatorError> {
        if values.len() != binomial2(n) {
            return Err(EstimatorError::Mismatch {
                what: "regularization parameter count",
                expected: binomial2(n),
                found: values.len(),
            });
        }
        if let Some((r, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(EstimatorError::InvalidRegularization(format!(
                "c[{r}] = {v} must be finite and non-negative"
            )));
        }
        Ok(Self { n, values })
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self, EstimatorError> {
        Self::new(n, vec![value; binomial2(n)])
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; binomial2(n)],
        }
    }

    /// Builds from `f(i, j)` over pairs `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, EstimatorError> {
        let values = PairIndexing::new(n).pairs().iter().map(|&(i, j)| f(i, j)).collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `c` for the unordered pair `{a, b}`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[PairIndexing::new(self.n).index(a, b)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Copy with pair `r` set to `value`.
    pub fn with_value(&self, r: usize, value: f64) -> Result<Self, EstimatorError> {
        let mut values = self.values.clone();
        values[r] = value;
        Self::new(self.n, values)
    }
}

/// How `c` is derived from the target variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CSchedule {
    /// Feasibility (C) or the PSD condition (E) holds for every circuit output.
    Guaranteed,
    /// Entries can reach the Cauchy–Schwarz bound; no a-priori guarantee.
    Correlation,
    Uniform(f64),
}

impl fmt::Display for CSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CSchedule::Guaranteed => f.write_str("guaranteed"),
            CSchedule::Correlation => f.write_str("correlation"),
            CSchedule::Uniform(v) => write!(f, "uniform:{v}"),
        }
    }
}

impl FromStr for CSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "guaranteed" => Ok(CSchedule::Guaranteed),
            "correlation" => Ok(CSchedule::Correlation),
            other => match other.strip_prefix("uniform:") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0 && v.is_finite())
                    .map(CSchedule::Uniform)
                    .ok_or_else(|| format!("invalid uniform value in {other:?}")),
                None => Err(format!(
                    "unknown c schedule {other:?} (expected guaranteed, correlation or uniform:VALUE)"
                )),
            },
        }
    }
}

impl From<CSchedule> for String {
    fn from(s: CSchedule) -> Self {
        s.to_string()
    }
}

impl TryFrom<String> for CSchedule {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn check_variances(variances: &[f64]) -> Result<(), EstimatorError> {
    match variances.iter().position(|v| !(*v >= 0.0)) {
        Some(index) => Err(EstimatorError::NegativeVariance {
            index,
            value: variances[index],
        }),
        None => Ok(()),
    }
}

/// `c_li = sqrt(Var(Xᵢ)/i)` (0-based `i ≥ 1`): the radicand of every `λᵢ`
/// stays non-negative for all `|x| ≤ 1`.
#[allow(non_snake_case)]
pub fn default_c_for_C(variances: &[f64]) -> Result<RegularizationParams, EstimatorError> {
    check_variances(variances)?;
    RegularizationParams::from_fn(variances.len(), |_, i| (variances[i] / i as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EMode {
    Guaranteed,
    Correlation,
}

/// Guaranteed: `min(Vᵢ, Vⱼ)/(n−1)`; correlation: `sqrt(Vᵢ·Vⱼ)`.
#[allow(non_snake_case)]
pub fn default_c_for_E(variances: &[f64], mode: EMode) -> Result<RegularizationParams, EstimatorError> {
    check_variances(variances)?;
    let n = variances.len();
    RegularizationParams::from_fn(n, |i, j| match mode {
        EMode::Guaranteed => variances[i].min(variances[j]) / (n - 1) as f64,
        EMode::Correlation => (variances[i] * variances[j]).sqrt(),
    })
}

/// Resolves a schedule for the given estimator. For the C-Estimator the
/// correlation schedule is `c_li = sqrt(Var(Xᵢ))`, which makes `L` a
/// row-scaled unit-row factor of a correlation matrix.
pub fn schedule_c(
    kind: EstimatorKind,
    schedule: CSchedule,
    variances: &[f64],
) -> Result<RegularizationParams, EstimatorError> {
    check_variances(variances)?;
    let n = variances.len();
    match (kind, schedule) {
        (_, CSchedule::Uniform(v)) => RegularizationParams::uniform(n, v),
        (EstimatorKind::C, CSchedule::Guaranteed) => default_c_for_C(variances),
        (EstimatorKind::C, CSchedule::Correlation) => {
            RegularizationParams::from_fn(n, |_, i| variances[i].sqrt())
        }
        (EstimatorKind::E, CSchedule::Guaranteed) => default_c_for_E(variances, EMode::Guaranteed),
        (EstimatorKind::E, CSchedule::Correlation) => default_c_for_E(variances, EMode::Correlation),
    }
}

/// Cholesky-form factor built from pair expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBuild {
    pub factor: LowerTriangular,
    /// `Var(Xᵢ) − Σ_l c_li²·x_li²` before clamping.
    pub radicands: Vec<f64>,
    pub clamped: Vec<usize>,
}

pub fn c_build_factor(x: &[f64], c: &RegularizationParams, variances: &[f64]) -> FactorBuild {
    let n = variances.len();
    let pairs = PairIndexing::new(n);
    let mut factor = LowerTriangular::zeros(n);
    let mut radicands = Vec::with_capacity(n);
    let mut clamped = Vec::new();
    for i in 0..n {
        let mut load = 0.0;
        for l in 0..i {
            let r = pairs.index(l, i);
            let entry = c.values()[r] * x[r];
            factor.set(i, l, entry);
            load += entry * entry;
        }
        let radicand = variances[i] - load;
        if radicand < 0.0 {
            clamped.push(i);
        }
        factor.set(i, i, radicand.max(0.0).sqrt());
        radicands.push(radicand);
    }
    FactorBuild {
        factor,
        radicands,
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexFeasibility {
    pub index: usize,
    pub load: f64,
    pub variance: f64,
    pub holds: bool,
    /// `Σ_l c_li²`, the load when every `|x| = 1`.
    pub worst_case_load: f64,
    pub worst_case_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub indices: Vec<IndexFeasibility>,
}

impl FeasibilityReport {
    pub fn holds(&self) -> bool {
        self.indices.iter().all(|f| f.holds)
    }

    pub fn holds_a_priori(&self) -> bool {
        self.indices.iter().all(|f| f.worst_case_holds)
    }

    pub fn violations(&self) -> Vec<usize> {
        self.indices.iter().filter(|f| !f.holds).map(|f| f.index).collect()
    }
}

/// Checks `Σ_{l<i} c_li²·x_li² ≤ Var(Xᵢ)` for every `i ≥ 1`.
pub fn c_feasibility(x: &[f64], c: &RegularizationParams, variances: &[f64]) -> FeasibilityReport {
    let n = variances.len();
    let pairs = PairIndexing::new(n);
    let indices = (1..n)
        .map(|i| {
            let (mut load, mut worst) = (0.0, 0.0);
            for l in 0..i {
                let r = pairs.index(l, i);
                let cr = c.values()[r];
                load += cr * cr * x[r] * x[r];
                worst += cr * cr;
            }
            IndexFeasibility {
                index: i,
                load,
                variance: variances[i],
                holds: load <= variances[i],
                worst_case_load: worst,
                worst_case_holds: worst <= variances[i],
            }
        })
        .collect();
    FeasibilityReport { indices }
}

/// `Σ_{l≠k} c_kl ≤ Var(X_k)` for every row `k`, up to summation rounding.
pub fn e_psd_condition(c: &RegularizationParams, variances: &[f64]) -> bool {
    let n = variances.len();
    let slack = 1.0 + 2.0 * n as f64 * f64::EPSILON;
    (0..n).all(|k| {
        let row: f64 = (0..n).filter(|&l| l != k).map(|l| c.get(k, l)).sum();
        row <= variances[k] * slack
    })
}

/// Target, weights, and optional mask/rank of one estimation task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorProblem {
    pub kind: EstimatorKind,
    pub target: SymmetricMatrix,
    pub c: RegularizationParams,
    pub mask: Option<ObservationMask>,
    pub rank_target: Option<usize>,
}

impl EstimatorProblem {
    pub fn new(kind: EstimatorKind, target: SymmetricMatrix, c: RegularizationParams) -> Result<Self, EstimatorError> {
        check_variances(&target.diagonal())?;
        if c.n() != target.n() {
            return Err(EstimatorError::Mismatch {
                what: "regularization dimension",
                expected: target.n(),
                found: c.n(),
            });
        }
        Ok(Self {
            kind,
            target,
            c,
            mask: None,
            rank_target: None,
        })
    }

    /// Uses `schedule` to derive `c` from the target's diagonal.
    pub fn with_schedule(kind: EstimatorKind, target: SymmetricMatrix, schedule: CSchedule) -> Result<Self, EstimatorError> {
        let c = schedule_c(kind, schedule, &target.diagonal())?;
        Self::new(kind, target, c)
    }

    pub fn with_mask(mut self, mask: ObservationMask) -> Result<Self, EstimatorError> {
        if mask.n() != self.n() {
            return Err(EstimatorError::Mismatch {
                what: "mask dimension",
                expected: self.n(),
                found: mask.n(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn with_rank(mut self, rank: usize) -> Result<Self, EstimatorError> {
        if self.kind != EstimatorKind::C {
            return Err(EstimatorError::RankNeedsCholesky);
        }
        if rank == 0 || rank > self.n() {
            return Err(EstimatorError::RankOutOfRange { rank, n: self.n() });
        }
        self.rank_target = Some(rank);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.target.n()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.target.diagonal()
    }

    /// Pair indices contributing off-diagonal loss terms.
    pub fn included_pairs(&self) -> Vec<usize> {
        let pairs = PairIndexing::new(self.n());
        match &self.mask {
            None => (0..pairs.len()).collect(),
            Some(mask) => {
                let mut r: Vec<usize> = mask.pairs().iter().map(|&(i, j)| pairs.index(i, j)).collect();
                r.sort_unstable();
                r
            }
        }
    }
}

struct CParts {
    build: FactorBuild,
    factor: LowerTriangular,
    sigma: SymmetricMatrix,
    tail: Vec<f64>,
}

/// Estimate and loss for one vector of expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub sigma_hat: SymmetricMatrix,
    pub factor: Option<LowerTriangular>,
    pub clamped: Vec<usize>,
    pub loss: f64,
}

/// A problem bound to a circuit shape and an observable assignment.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    problem: EstimatorProblem,
    spec: CircuitSpec,
    assignment: ObservableAssignment,
    pairs: PairIndexing,
    included: Vec<usize>,
    variances: Vec<f64>,
}

/// Register size each estimator runs on.
pub fn register_size(kind: EstimatorKind, n: usize) -> Result<usize, EstimatorError> {
    Ok(match kind {
        EstimatorKind::C => encoding::eta(n, 2)?,
        EstimatorKind::E => n,
    })
}

impl CovarianceModel {
    pub fn new(problem: EstimatorProblem, spec: CircuitSpec, assignment: ObservableAssignment) -> Result<Self, EstimatorError> {
        let n = problem.n();
        if assignment.n() != n {
            return Err(EstimatorError::Mismatch {
                what: "assignment variable count",
                expected: n,
                found: assignment.n(),
            });
        }
        if assignment.eta() != spec.eta {
            return Err(EstimatorError::Mismatch {
                what: "assignment register size",
                expected: spec.eta,
                found: assignment.eta(),
            });
        }
        if problem.kind == EstimatorKind::E && spec.eta != n {
            return Err(EstimatorError::Mismatch {
                what: "E-Estimator register size",
                expected: n,
                found: spec.eta,
            });
        }
        let included = problem.included_pairs();
        let variances = problem.variances();
        Ok(Self {
            pairs: PairIndexing::new(n),
            problem,
            spec,
            assignment,
            included,
            variances,
        })
    }

    /// Canonical register and assignment: `c_assignment` on `eta(n, 2)`
    /// qubits for C, `e_family` on `n` qubits for E.
    pub fn canonical(problem: EstimatorProblem, layers: usize) -> Result<Self, EstimatorError> {
        let n = problem.n();
        let assignment = match problem.kind {
            EstimatorKind::C => encoding::c_assignment(n)?,
            EstimatorKind::E => encoding::e_family(n)?,
        };
        let spec = CircuitSpec::new(assignment.eta(), layers)?;
        Self::new(problem, spec, assignment)
    }

    pub fn problem(&self) -> &EstimatorProblem {
        &self.problem
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn assignment(&self) -> &ObservableAssignment {
        &self.assignment
    }

    fn rank(&self) -> usize {
        self.problem.rank_target.unwrap_or(self.problem.n())
    }

    /// One pass over the assigned observables.
    pub fn expectations(&self, params: &ParamSet) -> Result<Vec<f64>, EstimatorError> {
        let state = run_hea(&self.spec, params)?;
        Ok(expectations_batch(&state, self.assignment.observables())?)
    }

    pub fn evaluate_expectations(&self, x: &[f64]) -> ModelEvaluation {
        match self.problem.kind {
            EstimatorKind::E => self.evaluate_e(x),
            EstimatorKind::C => self.evaluate_c(x),
        }
    }

    pub fn evaluate(&self, params: &ParamSet) -> Result<ModelEvaluation, EstimatorError> {
        Ok(self.evaluate_expectations(&self.expectations(params)?))
    }

    pub fn loss(&self, params: &ParamSet) -> Result<f64, EstimatorError> {
        Ok(self.evaluate(params)?.loss)
    }

    pub fn sigma_hat(&self, params: &ParamSet) -> Result<SymmetricMatrix, EstimatorError> {
        Ok(self.evaluate(params)?.sigma_hat)
    }

    fn evaluate_e(&self, x: &[f64]) -> ModelEvaluation {
        let c = self.problem.c.values();
        let n = self.problem.n();
        let mut sigma = SymmetricMatrix::diagonal_from(&self.variances).expect("n >= 2");
        for (r, &(i, j)) in self.pairs.pairs().iter().enumerate() {
            sigma.set(i, j, c[r] * x[r]);
        }
        let target = &self.problem.target;
        let loss = self
            .included
            .iter()
            .map(|&r| {
                let (i, j) = self.pairs.pair(r);
                (c[r] * x[r] - target.get(i, j)).powi(2)
            })
            .sum();
        debug_assert_eq!(sigma.n(), n);
        ModelEvaluation {
            sigma_hat: sigma,
            factor: None,
            clamped: Vec::new(),
            loss,
        }
    }

    fn truncated(&self, factor: &LowerTriangular) -> LowerTriangular {
        let n = factor.n();
        let rank = self.rank();
        if rank == n {
            return factor.clone();
        }
        let mut out = LowerTriangular::zeros(n);
        for i in 0..n {
            for j in 0..=i.min(rank - 1) {
                out.set(i, j, factor.get(i, j));
            }
        }
        out
    }

    /// Residuals `Σ̂ − Σ^ce` on included entries (diagonal always included).
    fn c_residuals(&self, sigma: &SymmetricMatrix) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
        let target = &self.problem.target;
        let off = self
            .included
            .iter()
            .map(|&r| {
                let (a, b) = self.pairs.pair(r);
                (b, a, sigma.get(b, a) - target.get(b, a))
            })
            .collect();
        let diag = (0..sigma.n()).map(|i| sigma.get(i, i) - target.get(i, i)).collect();
        (off, diag)
    }

    /// Factor, truncated factor, `Σ̂`, and for rows `i ≥ r` the variance left
    /// unexplained by the kept columns. Kept, unclamped diagonals equal the
    /// variances by construction and are pinned to them exactly.
    fn c_sigma(&self, x: &[f64]) -> CParts {
        let build = c_build_factor(x, &self.problem.c, &self.variances);
        let factor = self.truncated(&build.factor);
        let mut sigma = factor.gram();
        let rank = self.rank();
        for i in 0..rank {
            if build.radicands[i] >= 0.0 {
                sigma.set(i, i, self.variances[i]);
            }
        }
        let tail = (rank..self.problem.n())
            .map(|i| self.variances[i] - (0..rank).map(|l| factor.get(i, l).powi(2)).sum::<f64>())
            .collect();
        CParts {
            build,
            factor,
            sigma,
            tail,
        }
    }

    fn evaluate_c(&self, x: &[f64]) -> ModelEvaluation {
        let CParts {
            build,
            factor,
            sigma,
            tail,
        } = self.c_sigma(x);
        let (off, diag) = self.c_residuals(&sigma);
        let mut loss: f64 = off.iter().map(|(_, _, r)| r * r).sum::<f64>() + diag.iter().map(|r| r * r).sum::<f64>();
        loss += LOWRANK_PENALTY * tail.iter().map(|r| r.max(0.0)).sum::<f64>();
        ModelEvaluation {
            sigma_hat: sigma,
            factor: Some(factor),
            clamped: build.clamped,
            loss,
        }
    }

    /// `∂loss/∂x_r` for every pair, given the expectations.
    pub fn loss_sensitivity(&self, x: &[f64]) -> Vec<f64> {
        match self.problem.kind {
            EstimatorKind::E => {
                let c = self.problem.c.values();
                let mut s = vec![0.0; x.len()];
                for &r in &self.included {
                    let (i, j) = self.pairs.pair(r);
                    s[r] = 2.0 * (c[r] * x[r] - self.problem.target.get(i, j)) * c[r];
                }
                s
            }
            EstimatorKind::C => self.c_sensitivity(x),
        }
    }

    fn c_sensitivity(&self, x: &[f64]) -> Vec<f64> {
        let n = self.problem.n();
        let rank = self.rank();
        let c = self.problem.c.values();
        let CParts {
            build,
            factor,
            sigma,
            tail,
        } = self.c_sigma(x);
        let (off, diag) = self.c_residuals(&sigma);

        // ∂loss/∂L = M·L with M symmetric: 2R off the diagonal, 4R on it.
        let mut m = vec![0.0; n * n];
        for &(i, j, r) in &off {
            m[i * n + j] += 2.0 * r;
            m[j * n + i] += 2.0 * r;
        }
        for (i, r) in diag.iter().enumerate() {
            m[i * n + i] += 4.0 * r;
        }
        let dl = |a: usize, b: usize| -> f64 { (b..n).map(|k| m[a * n + k] * factor.get(k, b)).sum() };

        let mut s = vec![0.0; x.len()];
        for (r, &(l, i)) in self.pairs.pairs().iter().enumerate() {
            let cr = c[r];
            let mut acc = 0.0;
            if l < rank {
                acc += dl(i, l) * cr;
            }
            if i < rank && build.radicands[i] > 0.0 {
                let lambda = build.radicands[i].sqrt();
                acc += dl(i, i) * (-cr * cr * x[r] / lambda);
            }
            if i >= rank && l < rank && tail[i - rank] > 0.0 {
                acc += LOWRANK_PENALTY * (-2.0 * cr * cr * x[r]);
            }
            s[r] = acc;
        }
        s
    }

    /// Full loss gradient: shift-rule Jacobian contracted with the sensitivity.
    pub fn gradient(&self, params: &ParamSet) -> Result<Vec<f64>, EstimatorError> {
        let x = self.expectations(params)?;
        let sens = self.loss_sensitivity(&x);
        let jac = expectation_jacobian(&self.spec, params, self.assignment.observables())?;
        Ok(jac
            .iter()
            .map(|row| row.iter().zip(&sens).map(|(d, s)| d * s).sum())
            .collect())
    }

    /// `∂loss/∂θ_index` alone (three circuit evaluations).
    pub fn partial(&self, params: &ParamSet, index: usize) -> Result<f64, EstimatorError> {
        let x = self.expectations(params)?;
        let sens = self.loss_sensitivity(&x);
        let dx = param_shift_partial(&self.spec, params, self.assignment.observables(), index)?;
        Ok(dx.iter().zip(&sens).map(|(d, s)| d * s).sum())
    }
}

/// Adapter handing a model to the optimizer, tracking MAE against `reference`.
pub struct ModelObjective<'a> {
    pub model: &'a CovarianceModel,
    pub reference: Option<&'a SymmetricMatrix>,
}

impl Objective for ModelObjective<'_> {
    type Error = EstimatorError;

    fn evaluate(&self, params: &ParamSet) -> Result<Evaluation, Self::Error> {
        let eval = self.model.evaluate(params)?;
        let metric = match self.reference {
            Some(reference) => Some(linalg::mae(&eval.sigma_hat, reference)?),
            None => None,
        };
        Ok(Evaluation {
            loss: eval.loss,
            metric,
        })
    }

    fn gradient(&self, params: &ParamSet) -> Result<Vec<f64>, Self::Error> {
        self.model.gradient(params)
    }
}

pub fn c_loss(
    params: &ParamSet,
    problem: &EstimatorProblem,
    assignment: &ObservableAssignment,
    spec: &CircuitSpec,
) -> Result<f64, EstimatorError> {
    let mut problem = problem.clone();
    problem.rank_target = None;
    CovarianceModel::new(problem, *spec, assignment.clone())?.loss(params)
}

pub fn c_lowrank_loss(
    params: &ParamSet,
    problem: &EstimatorProblem,
    assignment: &ObservableAssignment,
    spec: &CircuitSpec,
) -> Result<f64, EstimatorError> {
    if problem.rank_target.is_none() {
        return Err(EstimatorError::RankOutOfRange { rank: 0, n: problem.n() });
    }
    CovarianceModel::new(problem.clone(), *spec, assignment.clone())?.loss(params)
}

pub fn e_entries(
    params: &ParamSet,
    problem: &EstimatorProblem,
    assignment: &ObservableAssignment,
    spec: &CircuitSpec,
) -> Result<SymmetricMatrix, EstimatorError> {
    CovarianceModel::new(problem.clone(), *spec, assignment.clone())?.sigma_hat(params)
}

pub fn e_loss(
    params: &ParamSet,
    problem: &EstimatorProblem,
    assignment: &ObservableAssignment,
    spec: &CircuitSpec,
) -> Result<f64, EstimatorError> {
    CovarianceModel::new(problem.clone(), *spec, assignment.clone())?.loss(params)
}

/// Loss gradient for either estimator kind.
pub fn loss_gradient(
    params: &ParamSet,
    problem: &EstimatorProblem,
    assignment: &ObservableAssignment,
    spec: &CircuitSpec,
) -> Result<Vec<f64>, EstimatorError> {
    CovarianceModel::new(problem.clone(), *spec, assignment.clone())?.gradient(params)
}

pub use loss_gradient as e_loss_gradient;

/// Output of a full optimization.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub n: usize,
    pub kind: EstimatorKind,
    pub eta: usize,
    pub layers: usize,
    pub final_loss: f64,
    pub best_iteration: usize,
    pub clamped_diagonals: Vec<usize>,
    pub sigma_hat: SymmetricMatrix,
    pub factor: Option<LowerTriangular>,
    pub rank_target: Option<usize>,
    pub observed_pairs: Option<usize>,
    pub c: Vec<f64>,
    pub config: OptimizerConfig,
    pub seed: u64,
    pub best_params: Vec<f64>,
    #[serde(skip)]
    pub trace: Trace,
}

impl EstimateResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// `Σ̂⁻¹` by two triangular solves per column against the learned factor.
    pub fn precision(&self) -> Result<Option<SymmetricMatrix>, EstimatorError> {
        match &self.factor {
            Some(l) => Ok(Some(linalg::precision_from_factor(l)?)),
            None => Ok(None),
        }
    }
}

fn run(
    model: &CovarianceModel,
    config: &OptimizerConfig,
    reference: Option<&SymmetricMatrix>,
) -> Result<EstimateResult, EstimatorError> {
    let theta0 = optimizer::init_params(model.spec(), config.seed);
    let objective = ModelObjective { model, reference };
    let (best, trace) = optimizer::minimize(&objective, theta0, config)?;
    let eval = model.evaluate(&best)?;
    let problem = model.problem();
    Ok(EstimateResult {
        n: problem.n(),
        kind: problem.kind,
        eta: model.spec().eta,
        layers: model.spec().layers,
        final_loss: eval.loss,
        best_iteration: trace.best_iteration,
        clamped_diagonals: eval.clamped,
        sigma_hat: eval.sigma_hat,
        factor: eval.factor,
        rank_target: problem.rank_target,
        observed_pairs: problem.mask.as_ref().map(|m| m.len()),
        c: problem.c.values().to_vec(),
        config: config.clone(),
        seed: config.seed,
        best_params: best.into_vec(),
        trace,
    })
}

/// Minimizes the problem's loss from seeded random angles and returns the
/// estimate at the best parameters seen. MAE is tracked against the target.
pub fn estimate(
    problem: &EstimatorProblem,
    spec: &CircuitSpec,
    config: &OptimizerConfig,
) -> Result<EstimateResult, EstimatorError> {
    let assignment = match problem.kind {
        EstimatorKind::C => encoding::c_assignment(problem.n())?,
        EstimatorKind::E => encoding::e_family(problem.n())?,
    };
    let model = CovarianceModel::new(problem.clone(), *spec, assignment)?;
    run(&model, config, Some(&problem.target))
}

/// Same as [`estimate`] for an explicitly bound model.
pub fn estimate_model(
    model: &CovarianceModel,
    config: &OptimizerConfig,
    reference: Option<&SymmetricMatrix>,
) -> Result<EstimateResult, EstimatorError> {
    run(model, config, reference)
}

#[derive(Debug, Clone, Serialize)]
pub struct Completion {
    pub result: EstimateResult,
    /// Full-matrix MAE against the hidden truth, when supplied.
    pub mae: Option<f64>,
}

/// Fits the mask-restricted loss and fills every entry from the learned model.
pub fn complete(
    problem: &EstimatorProblem,
    spec: &CircuitSpec,
    config: &OptimizerConfig,
    hidden: Option<&SymmetricMatrix>,
) -> Result<Completion, EstimatorError> {
    match &problem.mask {
        Some(mask) if !mask.is_empty() => {}
        _ => return Err(EstimatorError::EmptyMask),
    }
    let assignment = match problem.kind {
        EstimatorKind::C => encoding::c_assignment(problem.n())?,
        EstimatorKind::E => encoding::e_family(problem.n())?,
    };
    let model = CovarianceModel::new(problem.clone(), *spec, assignment)?;
    let result = run(&model, config, hidden)?;
    let mae = match hidden {
        Some(h) => Some(linalg::mae(&result.sigma_hat, h)?),
        None => None,
    };
    Ok(Completion { result, mae })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::jacobi_eigenvalues;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn decoupled_factor() {
        let v = [1.0, 4.0, 9.0];
        let build = c_build_factor(&[0.3, -0.2, 0.9], &RegularizationParams::zeros(3), &v);
        assert_eq!(build.factor.diagonal(), vec![1.0, 2.0, 3.0]);
        assert!(build.clamped.is_empty());
        assert_eq!(build.factor.gram(), SymmetricMatrix::diagonal_from(&v).unwrap());
    }

    #[test]
    fn boundary_clamp() {
        let c = RegularizationParams::uniform(2, 1.0).unwrap();
        let build = c_build_factor(&[1.0], &c, &[1.0, 1.0]);
        assert_eq!(build.factor.to_rows(), vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(build.radicands[1], 0.0);
        assert!(build.clamped.is_empty());
        assert_eq!(build.factor.gram(), sym(&[&[1.0, 1.0], &[1.0, 1.0]]));

        let over = RegularizationParams::uniform(2, 1.1).unwrap();
        let build = c_build_factor(&[1.0], &over, &[1.0, 1.0]);
        assert_eq!(build.clamped, vec![1]);
        assert_eq!(build.factor.get(1, 1), 0.0);
    }

    #[test]
    fn feasibility_reports() {
        let v = [1.0, 1.0, 1.0];
        let rep = c_feasibility(&[0.5, 0.5, 0.5], &RegularizationParams::zeros(3), &v);
        assert!(rep.holds() && rep.holds_a_priori());

        let c = RegularizationParams::uniform(2, 1.1).unwrap();
        let rep = c_feasibility(&[1.0], &c, &[1.0, 1.0]);
        assert_eq!(rep.violations(), vec![1]);
        assert!(!rep.holds_a_priori());
    }

    #[test]
    fn c_defaults() {
        let c = default_c_for_C(&[1.0, 4.0]).unwrap();
        assert_eq!(c.values(), &[2.0]);
        let c = default_c_for_C(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert!((c.get(0, 2) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((c.get(1, 2) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(default_c_for_C(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn e_defaults_and_condition() {
        let c = default_c_for_E(&[1.0, 1.0, 1.0], EMode::Guaranteed).unwrap();
        assert_eq!(c.values(), &[0.5, 0.5, 0.5]);
        assert!(e_psd_condition(&c, &[1.0, 1.0, 1.0]));
        let c = default_c_for_E(&[4.0, 9.0], EMode::Correlation).unwrap();
        assert_eq!(c.values(), &[6.0]);

        assert!(e_psd_condition(&RegularizationParams::uniform(2, 1.0).unwrap(), &[1.0, 1.0]));
        assert!(!e_psd_condition(&RegularizationParams::uniform(2, 1.5).unwrap(), &[1.0, 1.0]));
        for x in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            let eigs = jacobi_eigenvalues(&sym(&[&[1.0, x], &[x, 1.0]]));
            assert!(eigs[0] >= -1e-15);
        }
    }

    #[test]
    fn schedules_parse() {
        assert_eq!("guaranteed".parse::<CSchedule>().unwrap(), CSchedule::Guaranteed);
        assert_eq!("uniform:2.5".parse::<CSchedule>().unwrap(), CSchedule::Uniform(2.5));
        assert!("uniform:-1".parse::<CSchedule>().is_err());
        assert!("bogus".parse::<CSchedule>().is_err());
        assert_eq!(CSchedule::Uniform(1.0).to_string(), "uniform:1");
    }

    #[test]
    fn regularization_validation() {
        assert!(RegularizationParams::new(3, vec![1.0, 2.0]).is_err());
        assert!(RegularizationParams::new(2, vec![-1.0]).is_err());
        assert!(RegularizationParams::new(2, vec![f64::NAN]).is_err());
    }

    #[test]
    fn problem_validation() {
        let t = SymmetricMatrix::identity(3).unwrap();
        let p = EstimatorProblem::new(EstimatorKind::E, t.clone(), RegularizationParams::zeros(3)).unwrap();
        assert!(matches!(p.clone().with_rank(1), Err(EstimatorError::RankNeedsCholesky)));
        let pc = EstimatorProblem::new(EstimatorKind::C, t.clone(), RegularizationParams::zeros(3)).unwrap();
        assert!(pc.clone().with_rank(0).is_err());
        assert!(pc.clone().with_rank(4).is_err());
        assert!(pc.with_rank(3).is_ok());
        assert!(EstimatorProblem::new(EstimatorKind::C, t, RegularizationParams::zeros(2)).is_err());
        let neg = sym(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(EstimatorProblem::new(EstimatorKind::C, neg, RegularizationParams::zeros(2)).is_err());
    }
}
