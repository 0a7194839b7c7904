//! Gradient descent and Adam over circuit angles, with best-so-far traces
//! and multi-run aggregation.

use std::convert::Infallible;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{estimate, EstimateResult, EstimatorProblem};
use crate::format::fmt_g17;
use crate::rng::SeededRng;
use crate::simulator::{CircuitSpec, ParamSet};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {quantity} at iteration {iteration}: {value}")]
    NonFinite {
        iteration: usize,
        quantity: &'static str,
        value: f64,
    },
    #[error("gradient has {found} entries for {expected} parameters")]
    GradientShape { expected: usize, found: usize },
    #[error("objective failed at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("multi_run needs at least one run")]
    NoRuns,
    #[error("all {0} runs aborted")]
    AllRunsAborted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            learning_rate: 0.05,
            iterations: 300,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} = {b} must lie in (0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Independent `Uniform(−π, π)` angles from the seeded generator.
pub fn init_params(spec: &CircuitSpec, seed: u64) -> ParamSet {
    let mut rng = SeededRng::new(seed);
    let angles = (0..spec.num_params()).map(|_| rng.angle()).collect();
    ParamSet::new(spec, angles).expect("shape from spec")
}

/// Loss value plus an optional tracking metric (MAE against a known target).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: Option<f64>,
}

pub trait Objective {
    type Error: std::error::Error + Send + Sync + 'static;

    fn evaluate(&self, params: &ParamSet) -> Result<Evaluation, Self::Error>;
    fn gradient(&self, params: &ParamSet) -> Result<Vec<f64>, Self::Error>;
}

/// Objective from a pair of closures.
pub struct FnObjective<L, G> {
    pub loss: L,
    pub grad: G,
}

impl<L, G> Objective for FnObjective<L, G>
where
    L: Fn(&ParamSet) -> f64,
    G: Fn(&ParamSet) -> Vec<f64>,
{
    type Error = Infallible;

    fn evaluate(&self, params: &ParamSet) -> Result<Evaluation, Infallible> {
        Ok(Evaluation {
            loss: (self.loss)(params),
            metric: None,
        })
    }

    fn gradient(&self, params: &ParamSet) -> Result<Vec<f64>, Infallible> {
        Ok((self.grad)(params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub mae: Option<f64>,
    pub best_loss: f64,
    pub best_mae: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub best_iteration: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn initial_mae(&self) -> Option<f64> {
        self.records.first().and_then(|r| r.mae)
    }

    pub fn final_best_mae(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.best_mae)
    }

    pub fn final_best_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_loss)
    }

    /// CSV with header `iteration,loss,mae,best_loss,best_mae`; unknown MAE
    /// is written as an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,mae,best_loss,best_mae\n");
        let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                fmt_g17(r.loss),
                opt(r.mae),
                fmt_g17(r.best_loss),
                opt(r.best_mae)
            );
        }
        out
    }
}

fn check_finite(iteration: usize, quantity: &'static str, value: f64) -> Result<(), OptimizerError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(OptimizerError::NonFinite {
            iteration,
            quantity,
            value,
        })
    }
}

fn objective_error<E: std::error::Error + Send + Sync + 'static>(iteration: usize) -> impl FnOnce(E) -> OptimizerError {
    move |e| OptimizerError::Objective {
        iteration,
        source: Box::new(e),
    }
}

/// Records the evaluation at `θ_t`, then steps. Stops early when the loss is
/// exactly zero. Returns the parameters with the lowest recorded loss.
pub fn minimize<O: Objective>(
    objective: &O,
    theta0: ParamSet,
    config: &OptimizerConfig,
) -> Result<(ParamSet, Trace), OptimizerError> {
    config.validate()?;
    let dim = theta0.len();
    let mut theta = theta0;
    let mut best_params = theta.clone();
    let mut trace = Trace::default();
    let mut best_loss = f64::INFINITY;
    let mut best_mae: Option<f64> = None;
    let (mut m, mut v) = (vec![0.0; dim], vec![0.0; dim]);

    for t in 0..config.iterations {
        let eval = objective.evaluate(&theta).map_err(objective_error(t))?;
        check_finite(t, "loss", eval.loss)?;
        if let Some(mae) = eval.metric {
            check_finite(t, "mae", mae)?;
            best_mae = Some(best_mae.map_or(mae, |b: f64| b.min(mae)));
        }
        if eval.loss < best_loss {
            best_loss = eval.loss;
            best_params = theta.clone();
            trace.best_iteration = t;
        }
        trace.records.push(TraceRecord {
            iteration: t,
            loss: eval.loss,
            mae: eval.metric,
            best_loss,
            best_mae,
        });
        if eval.loss == 0.0 || t + 1 == config.iterations {
            break;
        }

        let grad = objective.gradient(&theta).map_err(objective_error(t))?;
        if grad.len() != dim {
            return Err(OptimizerError::GradientShape {
                expected: dim,
                found: grad.len(),
            });
        }
        if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
            check_finite(t, "gradient", *g)?;
        }
        let angles = theta.as_mut_slice();
        match config.algorithm {
            Algorithm::Gd => {
                for (a, g) in angles.iter_mut().zip(&grad) {
                    *a -= config.learning_rate * g;
                }
            }
            Algorithm::Adam => {
                let step = (t + 1) as i32;
                let bc1 = 1.0 - config.beta1.powi(step);
                let bc2 = 1.0 - config.beta2.powi(step);
                for k in 0..dim {
                    m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
                    v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    angles[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
                }
            }
        }
    }
    Ok((best_params, trace))
}

/// Per-iteration mean and population standard deviation of best-so-far MAE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedTrace {
    pub mean_best_mae: Vec<f64>,
    pub std_best_mae: Vec<f64>,
}

impl AggregatedTrace {
    pub fn len(&self) -> usize {
        self.mean_best_mae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_best_mae.is_empty()
    }

    /// CSV with header `iteration,mean_best_mae,std_best_mae`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mean_best_mae,std_best_mae\n");
        for (t, (m, s)) in self.mean_best_mae.iter().zip(&self.std_best_mae).enumerate() {
            let _ = writeln!(out, "{t},{},{}", fmt_g17(*m), fmt_g17(*s));
        }
        out
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aligns traces by iteration; a trace that stopped early is padded with its
/// last best-so-far MAE. Traces without MAE are skipped.
pub fn aggregate(traces: &[&Trace]) -> AggregatedTrace {
    let curves: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.records.iter().filter_map(|r| r.best_mae).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut mean_best_mae = Vec::with_capacity(len);
    let mut std_best_mae = Vec::with_capacity(len);
    for t in 0..len {
        let column: Vec<f64> = curves.iter().map(|c| c[t.min(c.len() - 1)]).collect();
        let (m, s) = mean_std(&column);
        mean_best_mae.push(m);
        std_best_mae.push(s);
    }
    AggregatedTrace {
        mean_best_mae,
        std_best_mae,
    }
}

#[derive(Debug)]
pub enum RunOutcome {
    Completed(Box<EstimateResult>),
    Aborted { seed: u64, error: String },
}

#[derive(Debug)]
pub struct MultiRun {
    pub outcomes: Vec<RunOutcome>,
    pub aggregate: AggregatedTrace,
    pub warnings: Vec<String>,
}

impl MultiRun {
    pub fn completed(&self) -> impl Iterator<Item = &EstimateResult> {
        self.outcomes.iter().filter_map(|o| match o {
            RunOutcome::Completed(r) => Some(r.as_ref()),
            RunOutcome::Aborted { .. } => None,
        })
    }

    pub fn final_best_maes(&self) -> Vec<f64> {
        self.completed().filter_map(|r| r.trace.final_best_mae()).collect()
    }

    pub fn initial_maes(&self) -> Vec<f64> {
        self.completed().filter_map(|r| r.trace.initial_mae()).collect()
    }
}

/// `runs` independent estimates with seeds `base_seed + k`, evaluated in
/// parallel and reduced in run order.
pub fn multi_run(
    problem: &EstimatorProblem,
    spec: &CircuitSpec,
    config: &OptimizerConfig,
    runs: usize,
    base_seed: u64,
) -> Result<MultiRun, OptimizerError> {
    if runs == 0 {
        return Err(OptimizerError::NoRuns);
    }
    config.validate()?;
    let outcomes: Vec<RunOutcome> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k as u64);
            match estimate(problem, spec, &config.with_seed(seed)) {
                Ok(r) => RunOutcome::Completed(Box::new(r)),
                Err(e) => RunOutcome::Aborted {
                    seed,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    let warnings: Vec<String> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Aborted { seed, error } => Some(format!("run with seed {seed} aborted: {error}")),
            RunOutcome::Completed(_) => None,
        })
        .collect();
    let traces: Vec<&Trace> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Completed(r) => Some(&r.trace),
            RunOutcome::Aborted { .. } => None,
        })
        .collect();
    if traces.is_empty() {
        return Err(OptimizerError::AllRunsAborted(runs));
    }
    let aggregate = aggregate(&traces);
    Ok(MultiRun {
        outcomes,
        aggregate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec1() -> CircuitSpec {
        CircuitSpec::new(1, 1).unwrap()
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = CircuitSpec::new(4, 3).unwrap();
        let a = init_params(&spec, 9);
        assert_eq!(a, init_params(&spec, 9));
        assert_eq!(a.len(), 12);
        assert!(a.as_slice().iter().all(|t| t.abs() < std::f64::consts::PI));
        assert_ne!(a, init_params(&spec, 10));
    }

    #[test]
    fn gd_quadratic() {
        let obj = FnObjective {
            loss: |p: &ParamSet| (p.as_slice()[0] - 2.0).powi(2),
            grad: |p: &ParamSet| vec![2.0 * (p.as_slice()[0] - 2.0)],
        };
        let cfg = OptimizerConfig {
            algorithm: Algorithm::Gd,
            learning_rate: 0.5,
            iterations: 50,
            ..Default::default()
        };
        let theta0 = ParamSet::new(&spec1(), vec![-1.0]).unwrap();
        let (best, trace) = minimize(&obj, theta0, &cfg).unwrap();
        assert!((best.as_slice()[0] - 2.0).abs() < 1e-6);
        assert!(trace.len() <= 50);
    }

    #[test]
    fn constant_loss_keeps_initial() {
        let obj = FnObjective {
            loss: |_: &ParamSet| 1.5,
            grad: |_: &ParamSet| vec![0.0],
        };
        let theta0 = ParamSet::new(&spec1(), vec![0.4]).unwrap();
        let cfg = OptimizerConfig {
            iterations: 10,
            ..Default::default()
        };
        let (best, trace) = minimize(&obj, theta0.clone(), &cfg).unwrap();
        assert_eq!(best, theta0);
        assert_eq!(trace.len(), 10);
        assert!(trace.records.iter().all(|r| r.loss == 1.5 && r.best_loss == 1.5));
        assert_eq!(trace.best_iteration, 0);
    }

    #[test]
    fn nan_aborts_with_iteration() {
        let obj = FnObjective {
            loss: |p: &ParamSet| if p.as_slice()[0] > 1.0 { f64::NAN } else { 0.5 },
            grad: |_: &ParamSet| vec![-1.0],
        };
        let cfg = OptimizerConfig {
            algorithm: Algorithm::Gd,
            learning_rate: 0.6,
            iterations: 10,
            ..Default::default()
        };
        let err = minimize(&obj, ParamSet::zeros(&spec1()), &cfg).unwrap_err();
        match err {
            OptimizerError::NonFinite { iteration, quantity, value } => {
                assert_eq!((iteration, quantity), (2, "loss"));
                assert!(value.is_nan());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn config_validation() {
        let ok = OptimizerConfig::default();
        assert!(ok.validate().is_ok());
        assert!(OptimizerConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(OptimizerConfig { iterations: 0, ..ok.clone() }.validate().is_err());
        assert!(OptimizerConfig { beta1: 1.0, ..ok.clone() }.validate().is_err());
        assert!(OptimizerConfig { beta2: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn aggregate_pads_and_uses_population_std() {
        let mk = |maes: &[f64]| Trace {
            records: maes
                .iter()
                .enumerate()
                .map(|(i, &m)| TraceRecord {
                    iteration: i,
                    loss: m,
                    mae: Some(m),
                    best_loss: m,
                    best_mae: Some(m),
                })
                .collect(),
            best_iteration: 0,
        };
        let a = mk(&[3.0, 1.0, 1.0]);
        let b = mk(&[1.0]);
        let agg = aggregate(&[&a, &b]);
        assert_eq!(agg.mean_best_mae, vec![2.0, 1.0, 1.0]);
        assert_eq!(agg.std_best_mae, vec![1.0, 0.0, 0.0]);
        let single = aggregate(&[&a]);
        assert_eq!(single.mean_best_mae, vec![3.0, 1.0, 1.0]);
        assert!(single.std_best_mae.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn trace_csv_layout() {
        let t = Trace {
            records: vec![TraceRecord {
                iteration: 0,
                loss: 0.5,
                mae: None,
                best_loss: 0.5,
                best_mae: None,
            }],
            best_iteration: 0,
        };
        assert_eq!(t.to_csv(), "iteration,loss,mae,best_loss,best_mae\n0,0.5,,0.5,\n");
    }
}
