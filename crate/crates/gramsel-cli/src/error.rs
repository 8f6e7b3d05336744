//! CLI error type and the exit-code contract.

use gramsel::{BaselineError, InstanceError, IoError, PlacementError, SystemError};
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_INVALID_INPUT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

fn placement_exit_code(err: &PlacementError) -> u8 {
    match err {
        // The problem as posed has no solution: the bound sits below the
        // full-actuation floor, the budget cannot cover the fallback set,
        // or no actuator set controls the system at all.
        PlacementError::InfeasibleBound { .. }
        | PlacementError::SystemNotControllable
        | PlacementError::DeltaCNotControllable
        | PlacementError::BudgetBelowDeltaC { .. } => EXIT_INFEASIBLE,
        PlacementError::CertificationFailed { .. } => EXIT_NUMERICAL,
        PlacementError::System(_)
        | PlacementError::EpsAboveCertificateLimit { .. }
        | PlacementError::InvalidParameter { .. } => EXIT_INVALID_INPUT,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Placement(e) => placement_exit_code(e),
            CliError::Baseline(e) => match e {
                BaselineError::Infeasible { .. }
                | BaselineError::UncontrollableAtBudget { .. } => EXIT_INFEASIBLE,
                BaselineError::Placement(p) => placement_exit_code(p),
                BaselineError::System(_)
                | BaselineError::TooLarge { .. }
                | BaselineError::Parameter { .. } => EXIT_INVALID_INPUT,
            },
            CliError::Io(_)
            | CliError::System(_)
            | CliError::Instance(_)
            | CliError::Csv(_)
            | CliError::File(_)
            | CliError::Usage(_) => EXIT_INVALID_INPUT,
        }
    }
}
