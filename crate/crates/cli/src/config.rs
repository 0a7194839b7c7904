//! Command-line grammar and configuration resolution.
//!
//! Precedence is flags over `--config` file over per-subcommand defaults.
//! A `provenance.json` written by an earlier run is accepted as a config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cpce_core::optimizer::Algorithm;
use cpce_core::plateau::LayerRule;
use cpce_core::{CSchedule, EstimatorKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cpce-cov", version, about = "Covariance estimation with variational quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one target matrix and write the estimate, trace, and result record.
    Estimate(Flags),
    /// Best-so-far MAE of both estimators on a random target.
    Convergence(Flags),
    /// Final MAE of the rank-constrained C-Estimator across assumed ranks.
    Lowrank(Flags),
    /// Full-matrix MAE after completing randomly masked targets.
    Complete(Flags),
    /// Optimization on a target with eigenvalues spanning several decades.
    Nearsingular(Flags),
    /// Gradient variance against register size and depth.
    Gradvar(Flags),
    /// Render a CSV produced by another subcommand as SVG.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Convergence(_) => "convergence",
            Command::Lowrank(_) => "lowrank",
            Command::Complete(_) => "complete",
            Command::Nearsingular(_) => "nearsingular",
            Command::Gradvar(_) => "gradvar",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Target matrix CSV (estimate only).
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<EstimatorKind>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = parse_algorithm)]
    pub optimizer: Option<Algorithm>,
    #[arg(long = "c-schedule", value_parser = parse_schedule)]
    pub c_schedule: Option<CSchedule>,
    /// Rank target of the C-Estimator (estimate).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Assumed ranks to sweep (lowrank), comma separated.
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long = "true-rank")]
    pub true_rank: Option<usize>,
    #[arg(long)]
    pub fractions: Option<String>,
    #[arg(long)]
    pub qubits: Option<String>,
    #[arg(long = "layers-rule", value_parser = parse_layer_rule)]
    pub layers_rule: Option<LayerRule>,
    /// Explicit depths to sweep in gradvar, comma separated.
    #[arg(long = "layer-counts")]
    pub layer_counts: Option<String>,
    /// Circuit depth of the estimators.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "eig-min")]
    pub eig_min: Option<f64>,
    /// Off-diagonal value of the gradvar target.
    #[arg(long)]
    pub offdiag: Option<f64>,
    /// Observed-pair CSV (estimate only).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    pub csv: PathBuf,
    /// Output file; defaults to the CSV path with an `.svg` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "log-y")]
    pub log_y: bool,
    #[arg(long, value_parser = ["line", "scatter"])]
    pub chart: Option<String>,
}

fn parse_kind(s: &str) -> Result<EstimatorKind, String> {
    s.parse()
}

fn parse_schedule(s: &str) -> Result<CSchedule, String> {
    s.parse()
}

fn parse_layer_rule(s: &str) -> Result<LayerRule, String> {
    s.parse().map_err(|e: cpce_core::plateau::PlateauError| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    match s {
        "adam" => Ok(Algorithm::Adam),
        "gd" => Ok(Algorithm::Gd),
        other => Err(format!("unknown optimizer {other:?} (expected adam or gd)")),
    }
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| CliError::Usage(format!("invalid {what} entry {t:?}")))
        })
        .collect()
}

/// Fully resolved parameters of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// `None` runs both estimators where a subcommand supports it.
    pub kind: Option<EstimatorKind>,
    pub runs: usize,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub optimizer: Algorithm,
    pub c_schedule: CSchedule,
    pub rank: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub true_rank: usize,
    pub fractions: Vec<f64>,
    pub qubits: Vec<usize>,
    pub layers_rule: LayerRule,
    pub layer_counts: Option<Vec<usize>>,
    pub layers: usize,
    pub samples: usize,
    pub eig_min: f64,
    pub offdiag: f64,
    pub target: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub svg: bool,
}

/// Same fields as [`RunConfig`], all optional, for config files.
/// Flag spellings (`iters`, `lr`, `c-schedule`, ...) are accepted too.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    kind: Option<Option<EstimatorKind>>,
    runs: Option<usize>,
    #[serde(alias = "iters")]
    iterations: Option<usize>,
    seed: Option<u64>,
    #[serde(alias = "lr")]
    learning_rate: Option<f64>,
    optimizer: Option<Algorithm>,
    #[serde(alias = "c-schedule")]
    c_schedule: Option<CSchedule>,
    rank: Option<Option<usize>>,
    ranks: Option<Option<Vec<usize>>>,
    #[serde(alias = "true-rank")]
    true_rank: Option<usize>,
    fractions: Option<Vec<f64>>,
    qubits: Option<Vec<usize>>,
    #[serde(alias = "layers-rule")]
    layers_rule: Option<LayerRule>,
    #[serde(alias = "layer-counts")]
    layer_counts: Option<Option<Vec<usize>>>,
    layers: Option<usize>,
    samples: Option<usize>,
    #[serde(alias = "eig-min")]
    eig_min: Option<f64>,
    offdiag: Option<f64>,
    target: Option<Option<PathBuf>>,
    mask: Option<Option<PathBuf>>,
    svg: Option<bool>,
}

pub const DEFAULT_LAYERS: usize = 4;

impl RunConfig {
    pub fn defaults(subcommand: &str) -> Self {
        let both = matches!(subcommand, "convergence" | "complete");
        let gradvar = subcommand == "gradvar";
        Self {
            n: 6,
            kind: if both { None } else { Some(EstimatorKind::C) },
            runs: if gradvar { 1 } else { 5 },
            iterations: if gradvar { 50 } else { 300 },
            seed: 0,
            learning_rate: 0.05,
            optimizer: Algorithm::Adam,
            c_schedule: if gradvar { CSchedule::Uniform(1.0) } else { CSchedule::Correlation },
            rank: None,
            ranks: None,
            true_rank: 2,
            fractions: vec![0.1, 0.3, 0.5],
            qubits: vec![4, 6, 8],
            layers_rule: LayerRule::Square,
            layer_counts: None,
            layers: DEFAULT_LAYERS,
            samples: 200,
            eig_min: 1e-4,
            offdiag: 0.0,
            target: None,
            mask: None,
            svg: false,
        }
    }

    fn apply_file(&mut self, f: FileConfig) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(
            n, kind, runs, iterations, seed, learning_rate, optimizer, c_schedule, rank, ranks, true_rank,
            fractions, qubits, layers_rule, layer_counts, layers, samples, eig_min, offdiag, target, mask, svg
        );
    }

    fn apply_flags(&mut self, f: &Flags) -> Result<(), CliError> {
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => { $( if let Some(v) = f.$flag.clone() { self.$field = v; } )* };
        }
        take!(n => n, runs => runs, iters => iterations, seed => seed, lr => learning_rate,
              optimizer => optimizer, c_schedule => c_schedule, true_rank => true_rank,
              layers_rule => layers_rule, layers => layers, samples => samples, eig_min => eig_min,
              offdiag => offdiag);
        if let Some(k) = f.kind {
            self.kind = Some(k);
        }
        if let Some(r) = f.rank {
            self.rank = Some(r);
        }
        if let Some(s) = &f.ranks {
            self.ranks = Some(parse_list("rank", s)?);
        }
        if let Some(s) = &f.fractions {
            self.fractions = parse_list("fraction", s)?;
        }
        if let Some(s) = &f.qubits {
            self.qubits = parse_list("qubit count", s)?;
        }
        if let Some(s) = &f.layer_counts {
            self.layer_counts = Some(parse_list("layer count", s)?);
        }
        if let Some(p) = &f.target {
            self.target = Some(p.clone());
        }
        if let Some(p) = &f.mask {
            self.mask = Some(p.clone());
        }
        if f.svg {
            self.svg = true;
        }
        Ok(())
    }

    /// Defaults, then the config file (if any), then explicit flags.
    pub fn resolve(subcommand: &str, flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(subcommand);
        if let Some(path) = &flags.config {
            cfg.apply_file(read_config_file(path)?);
        }
        cfg.apply_flags(flags)?;
        cfg.validate(subcommand)?;
        Ok(cfg)
    }

    pub fn validate(&self, subcommand: &str) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.n < 2 {
            return usage(format!("--n must be at least 2, got {}", self.n));
        }
        if self.runs == 0 {
            return usage("--runs must be at least 1".into());
        }
        if self.iterations == 0 {
            return usage("--iters must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return usage(format!("--lr must be positive, got {}", self.learning_rate));
        }
        if self.layers == 0 {
            return usage("--layers must be at least 1".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return usage(format!("missing fraction {f} outside [0, 1)"));
        }
        if self.true_rank == 0 || self.true_rank > self.n {
            return usage(format!("--true-rank {} outside 1..={}", self.true_rank, self.n));
        }
        for r in self.ranks.iter().flatten().chain(self.rank.iter()) {
            if *r == 0 || *r > self.n {
                return usage(format!("rank {r} outside 1..={}", self.n));
            }
        }
        if !(self.eig_min > 0.0 && self.eig_min <= 1.0) {
            return usage(format!("--eig-min {} outside (0, 1]", self.eig_min));
        }
        if self.layer_counts.iter().flatten().any(|l| *l == 0) {
            return usage("layer counts must be at least 1".into());
        }
        if subcommand == "estimate" && self.target.is_none() {
            return usage("estimate needs a target matrix file".into());
        }
        if subcommand != "estimate" && (self.target.is_some() || self.mask.is_some()) {
            return usage(format!("{subcommand} does not read a target or mask file"));
        }
        if subcommand == "gradvar" && self.qubits.is_empty() {
            return usage("--qubits must list at least one register size".into());
        }
        Ok(())
    }

    pub fn kinds(&self) -> Vec<EstimatorKind> {
        match self.kind {
            Some(k) => vec![k],
            None => vec![EstimatorKind::C, EstimatorKind::E],
        }
    }

    pub fn optimizer_config(&self) -> cpce_core::OptimizerConfig {
        cpce_core::OptimizerConfig {
            algorithm: self.optimizer,
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            seed: self.seed,
            ..Default::default()
        }
    }
}

/// Reads a config object, or the `config` member of a provenance record.
fn read_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("config {} is not valid JSON: {e}", path.display())))?;
    let body = match value.get("config") {
        Some(inner) if value.get("subcommand").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(body).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
}

/// Record written next to every experiment's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let flags = Flags {
            n: Some(4),
            qubits: Some("2,3".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve("gradvar", &flags).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.qubits, vec![2, 3]);
        assert_eq!(cfg.iterations, 50);
    }

    #[test]
    fn validation_is_usage_error() {
        let flags = Flags {
            n: Some(1),
            ..Default::default()
        };
        let err = RunConfig::resolve("convergence", &flags).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = RunConfig::resolve("estimate", &Flags::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::defaults("lowrank");
        let json = serde_json::to_string(&cfg).unwrap();
        let file: FileConfig = serde_json::from_str(&json).unwrap();
        let mut back = RunConfig::defaults("convergence");
        back.apply_file(file);
        assert_eq!(back, cfg);
    }
}
