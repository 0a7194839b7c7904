//! Gradient-variance diagnostics for the E-Estimator loss over random angles.
//!
//! For a loss `Σ_r (c_r⟨Π_r⟩ − Σ^s_r)²` on a deep random circuit the variance
//! of a single partial derivative is bounded by
//! `(‖c∘c‖₂² + ‖c‖₂²·‖Σ^s‖₂²) / 2ⁿ` up to a constant. Large `c_r` lift it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::PairIndexing;
use crate::estimators::{
    CSchedule, CovarianceModel, EstimatorError, EstimatorKind, EstimatorProblem, RegularizationParams,
};
use crate::linalg::SymmetricMatrix;
use crate::rng::SeededRng;
use crate::simulator::{CircuitSpec, ParamSet};

/// Fewest samples accepted by a sweep.
pub const MIN_SAMPLES: usize = 30;

#[derive(Debug, Error)]
pub enum PlateauError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("gradient variance needs an E-Estimator problem")]
    NotEKind,
    #[error("need at least {min} samples, got {found}")]
    TooFewSamples { min: usize, found: usize },
    #[error("qubit count {0} below 2")]
    TooFewQubits(usize),
    #[error("parameter index {index} out of range for {count} angles")]
    ParamIndex { index: usize, count: usize },
    #[error("invalid layer rule {0:?} (expected n2 or linear:K)")]
    LayerRule(String),
}

/// Circuit depth as a function of register size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LayerRule {
    /// `L = n²`.
    Square,
    /// `L = K·n`.
    Linear(usize),
}

impl LayerRule {
    pub fn layers(&self, n: usize) -> usize {
        match self {
            LayerRule::Square => n * n,
            LayerRule::Linear(k) => k * n,
        }
    }
}

impl fmt::Display for LayerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerRule::Square => f.write_str("n2"),
            LayerRule::Linear(k) => write!(f, "linear:{k}"),
        }
    }
}

impl FromStr for LayerRule {
    type Err = PlateauError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "n2" {
            return Ok(LayerRule::Square);
        }
        s.strip_prefix("linear:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k >= 1)
            .map(LayerRule::Linear)
            .ok_or_else(|| PlateauError::LayerRule(s.to_string()))
    }
}

impl From<LayerRule> for String {
    fn from(r: LayerRule) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for LayerRule {
    type Error = PlateauError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Middle layer, qubit 0.
pub fn default_parameter_index(spec: &CircuitSpec) -> usize {
    (spec.layers / 2) * spec.eta
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of [`sample_variance`] from the fourth central moment.
pub fn variance_standard_error(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 4 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let s2 = sample_variance(values);
    ((m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0).sqrt()
}

/// Angles for sample `s`: stream `s` of `seed`, drawn in flat order.
pub fn sample_params(spec: &CircuitSpec, seed: u64, sample: usize) -> ParamSet {
    let mut rng = SeededRng::with_stream(seed, sample as u64);
    let angles = (0..spec.num_params()).map(|_| rng.angle()).collect();
    ParamSet::new(spec, angles).expect("shape from spec")
}

fn check_model(model: &CovarianceModel, samples: usize, index: usize) -> Result<(), PlateauError> {
    if model.problem().kind != EstimatorKind::E {
        return Err(PlateauError::NotEKind);
    }
    if samples < 2 {
        return Err(PlateauError::TooFewSamples { min: 2, found: samples });
    }
    let count = model.spec().num_params();
    if index >= count {
        return Err(PlateauError::ParamIndex { index, count });
    }
    Ok(())
}

/// `∂L/∂θ_index` at `samples` random angle draws, in sample order.
pub fn gradient_samples(
    model: &CovarianceModel,
    samples: usize,
    index: usize,
    seed: u64,
) -> Result<Vec<f64>, PlateauError> {
    check_model(model, samples, index)?;
    let spec = *model.spec();
    (0..samples)
        .into_par_iter()
        .map(|s| Ok(model.partial(&sample_params(&spec, seed, s), index)?))
        .collect()
}

pub fn gradient_variance(
    model: &CovarianceModel,
    samples: usize,
    index: usize,
    seed: u64,
) -> Result<f64, PlateauError> {
    Ok(sample_variance(&gradient_samples(model, samples, index, seed)?))
}

/// Mean of the per-index variances over every angle.
pub fn gradient_variance_all(model: &CovarianceModel, samples: usize, seed: u64) -> Result<f64, PlateauError> {
    let count = model.spec().num_params();
    let mut total = 0.0;
    for index in 0..count {
        total += gradient_variance(model, samples, index, seed)?;
    }
    Ok(total / count as f64)
}

/// `(Σ_r c_r⁴ + Σ_r c_r² · Σ_r (Σ^s_r)²) / 2ⁿ` over the off-diagonal pairs.
pub fn theorem_bound(c: &RegularizationParams, target: &SymmetricMatrix) -> f64 {
    let n = target.n();
    let pairs = PairIndexing::new(n);
    let c4: f64 = c.values().iter().map(|v| v.powi(4)).sum();
    let c2: f64 = c.values().iter().map(|v| v * v).sum();
    let t2: f64 = pairs.pairs().iter().map(|&(i, j)| target.get(i, j).powi(2)).sum();
    (c4 + c2 * t2) / 2f64.powi(n as i32)
}

/// Target used by sweeps: unit variances, every off-diagonal entry equal.
pub fn sweep_target(n: usize, off_diagonal: f64) -> Result<SymmetricMatrix, EstimatorError> {
    Ok(SymmetricMatrix::from_lower_fn(n, |i, j| if i == j { 1.0 } else { off_diagonal })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSweepConfig {
    pub qubit_counts: Vec<usize>,
    pub layer_rule: LayerRule,
    pub samples: usize,
    pub c_schedule: CSchedule,
    /// Off-diagonal value of the sweep target.
    pub target_off_diagonal: f64,
    pub seed: u64,
    /// Average over every angle instead of the middle-layer default.
    pub all_indices: bool,
}

impl Default for VarianceSweepConfig {
    fn default() -> Self {
        Self {
            qubit_counts: vec![4, 6, 8],
            layer_rule: LayerRule::Square,
            samples: 200,
            c_schedule: CSchedule::Uniform(1.0),
            target_off_diagonal: 0.0,
            seed: 0,
            all_indices: false,
        }
    }
}

impl VarianceSweepConfig {
    pub fn validate(&self) -> Result<(), PlateauError> {
        if self.samples < MIN_SAMPLES {
            return Err(PlateauError::TooFewSamples {
                min: MIN_SAMPLES,
                found: self.samples,
            });
        }
        if let Some(&n) = self.qubit_counts.iter().find(|&&n| n < 2) {
            return Err(PlateauError::TooFewQubits(n));
        }
        Ok(())
    }

    pub fn problem(&self, n: usize) -> Result<EstimatorProblem, PlateauError> {
        let target = sweep_target(n, self.target_off_diagonal)?;
        Ok(EstimatorProblem::with_schedule(EstimatorKind::E, target, self.c_schedule)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub n: usize,
    pub layers: usize,
    pub samples: usize,
    pub variance: f64,
    pub bound: f64,
    /// `variance / bound`; NaN when the bound is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub rows: Vec<VarianceRow>,
}

impl VarianceReport {
    pub fn variance_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.variance)
    }

    /// Least-squares slope of `log₂(variance)` against `n`.
    pub fn log2_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.n as f64, r.variance.log2()))
            .collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

fn row(model: &CovarianceModel, samples: usize, seed: u64, all: bool) -> Result<VarianceRow, PlateauError> {
    let spec = model.spec();
    let variance = if all {
        gradient_variance_all(model, samples, seed)?
    } else {
        gradient_variance(model, samples, default_parameter_index(spec), seed)?
    };
    let problem = model.problem();
    let bound = theorem_bound(&problem.c, &problem.target);
    Ok(VarianceRow {
        n: problem.n(),
        layers: spec.layers,
        samples,
        variance,
        bound,
        ratio: if bound > 0.0 { variance / bound } else { f64::NAN },
    })
}

/// One row per qubit count, each at depth `layer_rule(n)`.
pub fn variance_sweep(config: &VarianceSweepConfig) -> Result<VarianceReport, PlateauError> {
    config.validate()?;
    let rows = config
        .qubit_counts
        .iter()
        .map(|&n| {
            let model = CovarianceModel::canonical(config.problem(n)?, config.layer_rule.layers(n))?;
            row(&model, config.samples, config.seed, config.all_indices)
        })
        .collect::<Result<_, _>>()?;
    Ok(VarianceReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationReport {
    pub base: VarianceRow,
    pub scaled: VarianceRow,
}

impl MitigationReport {
    pub fn mitigated(&self) -> bool {
        self.scaled.variance > self.base.variance
    }
}

/// Same seeds, same angle index, two `c` schedules.
pub fn mitigation_demo(
    base: &EstimatorProblem,
    scaled_c: &RegularizationParams,
    layers: usize,
    samples: usize,
    seed: u64,
) -> Result<MitigationReport, PlateauError> {
    let mut scaled = base.clone();
    scaled.c = scaled_c.clone();
    let base_model = CovarianceModel::canonical(base.clone(), layers)?;
    let scaled_model = CovarianceModel::canonical(scaled, layers)?;
    Ok(MitigationReport {
        base: row(&base_model, samples, seed, false)?,
        scaled: row(&scaled_model, samples, seed, false)?,
    })
}

/// `base` with pair `r` raised to `2^{n/2}`.
pub fn exponential_c(base: &RegularizationParams, r: usize) -> Result<RegularizationParams, EstimatorError> {
    base.with_value(r, 2f64.powf(base.n() as f64 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_rules() {
        assert_eq!("n2".parse::<LayerRule>().unwrap().layers(4), 16);
        assert_eq!("linear:3".parse::<LayerRule>().unwrap().layers(4), 12);
        assert!("linear:0".parse::<LayerRule>().is_err());
        assert!("cubic".parse::<LayerRule>().is_err());
        assert_eq!(LayerRule::Linear(2).to_string(), "linear:2");
    }

    #[test]
    fn bound_arithmetic() {
        let t = SymmetricMatrix::identity(4).unwrap();
        assert_eq!(theorem_bound(&RegularizationParams::zeros(4), &t), 0.0);
        let ones = RegularizationParams::uniform(4, 1.0).unwrap();
        assert_eq!(theorem_bound(&ones, &t), 6.0 / 16.0);
        let t2 = sweep_target(4, 0.5).unwrap();
        let first = theorem_bound(&ones, &t);
        let both = theorem_bound(&ones, &t2);
        let twos = ones.scaled(2.0);
        assert_eq!(theorem_bound(&twos, &t2), 16.0 * first + 4.0 * (both - first));
    }

    #[test]
    fn variance_helpers() {
        assert_eq!(sample_variance(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(sample_variance(&[1.0, 3.0]), 2.0);
        assert_eq!(default_parameter_index(&CircuitSpec::new(4, 16).unwrap()), 32);
    }

    #[test]
    fn sweep_validation() {
        let cfg = VarianceSweepConfig {
            samples: 10,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(PlateauError::TooFewSamples { .. })));
        let cfg = VarianceSweepConfig {
            qubit_counts: vec![1],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(PlateauError::TooFewQubits(1))));
    }

    #[test]
    fn c_kind_rejected() {
        let p = EstimatorProblem::with_schedule(
            EstimatorKind::C,
            SymmetricMatrix::identity(3).unwrap(),
            CSchedule::Guaranteed,
        )
        .unwrap();
        let model = CovarianceModel::canonical(p, 2).unwrap();
        assert!(matches!(gradient_variance(&model, 40, 0, 1), Err(PlateauError::NotEKind)));
    }
}
