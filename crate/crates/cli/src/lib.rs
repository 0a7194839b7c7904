//! Command-line driver: one-shot estimation, the experiment suite, and SVG
//! plotting. Results are computed in full before anything is written.

pub mod config;
pub mod error;
pub mod experiments;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use config::{Cli, Command, Provenance, RunConfig};
use error::CliError;
use experiments::Artifact;
use svg::{chart_from_csv, ChartKind};

pub const TOOL: &str = "cpce-cov";

/// What a successful invocation wrote.
#[derive(Debug, Default)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

fn plot(args: &config::PlotArgs) -> Result<Report, CliError> {
    let text = fs::read_to_string(&args.csv)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.csv.display())))?;
    let kind = args.chart.as_deref().map(|c| if c == "scatter" { ChartKind::Scatter } else { ChartKind::Line });
    let chart = chart_from_csv(&text, kind, args.log_y.then_some(true))?;
    let svg = chart.render()?;
    let path = args.out.clone().unwrap_or_else(|| args.csv.with_extension("svg"));
    fs::write(&path, svg).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(Report {
        written: vec![path],
        warnings: Vec::new(),
    })
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let flags = match &cli.command {
        Command::Plot(args) => return plot(args),
        Command::Estimate(f)
        | Command::Convergence(f)
        | Command::Lowrank(f)
        | Command::Complete(f)
        | Command::Nearsingular(f)
        | Command::Gradvar(f) => f,
    };
    let subcommand = cli.command.name();
    let cfg = RunConfig::resolve(subcommand, flags)?;
    let mut outcome = experiments::run(subcommand, &cfg)?;

    if cfg.svg {
        if let Some(primary) = outcome.primary.clone() {
            let csv = outcome.artifacts.iter().find(|a| a.name == primary).expect("primary artifact exists");
            let svg = chart_from_csv(&csv.contents, None, None)?.render()?;
            let name = Path::new(&primary).with_extension("svg").to_string_lossy().into_owned();
            outcome.artifacts.push(Artifact { name, contents: svg });
        }
    }
    let provenance = Provenance {
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config: cfg,
        artifacts: outcome.artifacts.iter().map(|a| a.name.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&provenance).expect("provenance serializes") + "\n";
    outcome.artifacts.push(Artifact {
        name: "provenance.json".into(),
        contents: json,
    });

    let dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("results").join(subcommand));
    Ok(Report {
        written: write_all(&dir, &outcome.artifacts)?,
        warnings: outcome.warnings,
    })
}
