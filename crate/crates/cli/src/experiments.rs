//! Experiment drivers. Each returns its artifacts in memory; nothing here
//! touches the filesystem except reading inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cpce_core::estimators::{self, register_size};
use cpce_core::format::{fmt_g17, matrix_to_csv, read_mask, read_symmetric};
use cpce_core::linalg::{self, random_lowrank_psd, random_mask, random_near_singular, random_psd};
use cpce_core::optimizer::{mean_std, multi_run, MultiRun, RunOutcome};
use cpce_core::plateau::{self, exponential_c, gradient_variance, theorem_bound, VarianceSweepConfig};
use cpce_core::{CircuitSpec, CovarianceModel, EstimatorKind, EstimatorProblem, SymmetricMatrix};

use crate::config::RunConfig;
use crate::error::CliError;

/// Asymmetry tolerated in a target file before it is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Self {
            name: name.to_string(),
            contents,
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Artifact that `--svg` renders.
    pub primary: Option<String>,
    pub warnings: Vec<String>,
}

pub fn run(subcommand: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match subcommand {
        "estimate" => estimate(cfg),
        "convergence" => convergence(cfg),
        "lowrank" => lowrank(cfg),
        "complete" => completion(cfg),
        "nearsingular" => nearsingular(cfg),
        "gradvar" => gradvar(cfg),
        other => Err(CliError::Usage(format!("unknown experiment {other:?}"))),
    }
}

fn spec_for(kind: EstimatorKind, n: usize, layers: usize) -> Result<CircuitSpec, CliError> {
    Ok(CircuitSpec::new(register_size(kind, n)?, layers)?)
}

fn runs_of(problem: &EstimatorProblem, cfg: &RunConfig, out: &mut Outcome) -> Result<MultiRun, CliError> {
    let spec = spec_for(problem.kind, problem.n(), cfg.layers)?;
    let runs = multi_run(problem, &spec, &cfg.optimizer_config(), cfg.runs, cfg.seed)?;
    out.warnings.extend(runs.warnings.iter().cloned());
    Ok(runs)
}

/// MAE of each returned estimate against the full target.
fn final_maes(runs: &MultiRun, target: &SymmetricMatrix) -> Result<Vec<f64>, CliError> {
    runs.completed()
        .map(|r| Ok(linalg::mae(&r.sigma_hat, target)?))
        .collect()
}

fn kind_label(kind: EstimatorKind) -> String {
    kind.to_string()
}

fn read_file(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))
}

fn estimate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let path = cfg.target.as_deref().ok_or_else(|| CliError::Usage("estimate needs a target file".into()))?;
    let (target, asym) = read_symmetric(&read_file(path, "target")?, SYMMETRY_TOLERANCE)?;
    if asym > 0.0 {
        out.warnings.push(format!("target asymmetric by up to {asym:e}; averaged with its transpose"));
    }
    let kind = cfg.kind.unwrap_or(EstimatorKind::C);
    let mut problem = EstimatorProblem::with_schedule(kind, target, cfg.c_schedule)?;
    if let Some(r) = cfg.rank {
        problem = problem.with_rank(r)?;
    }
    let spec = spec_for(kind, problem.n(), cfg.layers)?;
    let opt = cfg.optimizer_config();
    let result = match &cfg.mask {
        Some(mask_path) => {
            let mask = read_mask(&read_file(mask_path, "mask")?, problem.n())?;
            problem = problem.with_mask(mask)?;
            estimators::complete(&problem, &spec, &opt, None)?.result
        }
        None => estimators::estimate(&problem, &spec, &opt)?,
    };
    if !result.clamped_diagonals.is_empty() {
        out.warnings.push(format!(
            "c infeasible for the learned correlations; diagonals {:?} were clamped to zero",
            result.clamped_diagonals
        ));
    }
    out.artifacts.push(Artifact::new("sigma_hat.csv", matrix_to_csv(&result.sigma_hat)));
    out.artifacts.push(Artifact::new("trace.csv", result.trace.to_csv()));
    out.artifacts.push(Artifact::new("result.json", result.to_json() + "\n"));
    let invertible = result.factor.as_ref().is_some_and(|l| l.diagonal().iter().all(|d| *d > 0.0));
    if invertible {
        if let Some(p) = result.precision()? {
            out.artifacts.push(Artifact::new("precision.csv", matrix_to_csv(&p)));
        }
    }
    out.primary = Some("trace.csv".into());
    Ok(out)
}

fn convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let target = random_psd(cfg.n, cfg.seed)?;
    let mut csv = String::from("kind,iteration,mean_best_mae,std_best_mae\n");
    for kind in cfg.kinds() {
        let problem = EstimatorProblem::with_schedule(kind, target.clone(), cfg.c_schedule)?;
        let runs = runs_of(&problem, cfg, &mut out)?;
        let agg = &runs.aggregate;
        for (t, (m, s)) in agg.mean_best_mae.iter().zip(&agg.std_best_mae).enumerate() {
            writeln!(csv, "{},{t},{},{}", kind_label(kind), fmt_g17(*m), fmt_g17(*s)).unwrap();
        }
    }
    out.artifacts.push(Artifact::new("convergence.csv", csv));
    out.primary = Some("convergence.csv".into());
    Ok(out)
}

fn lowrank(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.kind == Some(EstimatorKind::E) {
        return Err(CliError::Usage("lowrank sweeps the C-Estimator only".into()));
    }
    let mut out = Outcome::default();
    let target = random_lowrank_psd(cfg.n, cfg.true_rank, cfg.seed)?;
    let ranks = cfg.ranks.clone().unwrap_or_else(|| (1..=cfg.n).collect());
    let mut csv = String::from("r,mean_final_mae,std_final_mae\n");
    for r in ranks {
        let problem = EstimatorProblem::with_schedule(EstimatorKind::C, target.clone(), cfg.c_schedule)?.with_rank(r)?;
        let runs = runs_of(&problem, cfg, &mut out)?;
        let (m, s) = mean_std(&final_maes(&runs, &target)?);
        writeln!(csv, "{r},{},{}", fmt_g17(m), fmt_g17(s)).unwrap();
    }
    out.artifacts.push(Artifact::new("lowrank.csv", csv));
    out.primary = Some("lowrank.csv".into());
    Ok(out)
}

fn completion(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let target = random_psd(cfg.n, cfg.seed)?;
    let mut csv = String::from("fraction,kind,mean_final_mae,std_final_mae\n");
    for &fraction in &cfg.fractions {
        let mask = random_mask(cfg.n, fraction, cfg.seed)?;
        if mask.is_empty() {
            return Err(CliError::Usage(format!("missing fraction {fraction} leaves no observed pairs")));
        }
        for kind in cfg.kinds() {
            let problem = EstimatorProblem::with_schedule(kind, target.clone(), cfg.c_schedule)?.with_mask(mask.clone())?;
            let runs = runs_of(&problem, cfg, &mut out)?;
            let (m, s) = mean_std(&final_maes(&runs, &target)?);
            writeln!(csv, "{},{},{},{}", fmt_g17(fraction), kind_label(kind), fmt_g17(m), fmt_g17(s)).unwrap();
        }
    }
    out.artifacts.push(Artifact::new("completion.csv", csv));
    out.primary = Some("completion.csv".into());
    Ok(out)
}

fn nearsingular(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let target = random_near_singular(cfg.n, cfg.eig_min, 1.0, cfg.seed)?;
    let kind = cfg.kind.unwrap_or(EstimatorKind::C);
    let problem = EstimatorProblem::with_schedule(kind, target, cfg.c_schedule)?;
    let runs = runs_of(&problem, cfg, &mut out)?;
    if let Some(RunOutcome::Aborted { seed, error }) =
        runs.outcomes.iter().find(|o| matches!(o, RunOutcome::Aborted { .. }))
    {
        return Err(CliError::Numerical(format!("run with seed {seed} aborted: {error}")));
    }
    out.artifacts.push(Artifact::new("nearsingular.csv", runs.aggregate.to_csv()));
    out.primary = Some("nearsingular.csv".into());
    Ok(out)
}

fn gradvar(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let sweep = VarianceSweepConfig {
        qubit_counts: cfg.qubits.clone(),
        layer_rule: cfg.layers_rule,
        samples: cfg.samples,
        c_schedule: cfg.c_schedule,
        target_off_diagonal: cfg.offdiag,
        seed: cfg.seed,
        all_indices: false,
    };
    sweep.validate()?;
    let opt = cfg.optimizer_config();
    let mut csv = String::from("n,layers,samples,variance,bound,ratio,converged_loss\n");
    let mut mitigation =
        String::from("n,layers,samples,base_variance,scaled_variance,base_bound,scaled_bound,mitigated\n");
    for &n in &cfg.qubits {
        let problem = sweep.problem(n)?;
        let bound = theorem_bound(&problem.c, &problem.target);
        let depths = cfg.layer_counts.clone().unwrap_or_else(|| vec![cfg.layers_rule.layers(n)]);
        for layers in depths {
            let model = CovarianceModel::canonical(problem.clone(), layers)?;
            let index = plateau::default_parameter_index(model.spec());
            let variance = gradient_variance(&model, cfg.samples, index, cfg.seed)?;
            let runs = multi_run(&problem, model.spec(), &opt, cfg.runs, cfg.seed)?;
            out.warnings.extend(runs.warnings.iter().cloned());
            let losses: Vec<f64> = runs.completed().map(|r| r.final_loss).collect();
            let ratio = if bound > 0.0 { variance / bound } else { f64::NAN };
            writeln!(
                csv,
                "{n},{layers},{},{},{},{},{}",
                cfg.samples,
                fmt_g17(variance),
                fmt_g17(bound),
                fmt_g17(ratio),
                fmt_g17(mean_std(&losses).0)
            )
            .unwrap();
        }
        let layers = cfg.layers_rule.layers(n);
        let report = plateau::mitigation_demo(&problem, &exponential_c(&problem.c, 0)?, layers, cfg.samples, cfg.seed)?;
        writeln!(
            mitigation,
            "{n},{layers},{},{},{},{},{},{}",
            cfg.samples,
            fmt_g17(report.base.variance),
            fmt_g17(report.scaled.variance),
            fmt_g17(report.base.bound),
            fmt_g17(report.scaled.bound),
            report.mitigated()
        )
        .unwrap();
    }
    out.artifacts.push(Artifact::new("gradvar.csv", csv));
    out.artifacts.push(Artifact::new("mitigation.csv", mitigation));
    out.primary = Some("gradvar.csv".into());
    Ok(out)
}
