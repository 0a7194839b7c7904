//! Error classes of the command-line tool and their exit codes.

use cpce_core::estimators::EstimatorError;
use cpce_core::format::FormatError;
use cpce_core::optimizer::OptimizerError;
use cpce_core::plateau::PlateauError;
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn is_numerical(e: &OptimizerError) -> bool {
    matches!(e, OptimizerError::NonFinite { .. } | OptimizerError::AllRunsAborted(_))
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match &e {
            EstimatorError::Optimizer(o) if is_numerical(o) => CliError::Numerical(e.to_string()),
            EstimatorError::Optimizer(OptimizerError::InvalidConfig(_))
            | EstimatorError::RankOutOfRange { .. }
            | EstimatorError::RankNeedsCholesky => CliError::Usage(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match e {
            ref o if is_numerical(o) => CliError::Numerical(e.to_string()),
            OptimizerError::InvalidConfig(_) | OptimizerError::NoRuns => CliError::Usage(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PlateauError> for CliError {
    fn from(e: PlateauError) -> Self {
        match e {
            PlateauError::Estimator(inner) => inner.into(),
            PlateauError::TooFewSamples { .. } | PlateauError::TooFewQubits(_) | PlateauError::LayerRule(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_error!(
    cpce_core::linalg::LinalgError,
    cpce_core::simulator::SimulatorError,
    cpce_core::encoding::EncodingError
);
