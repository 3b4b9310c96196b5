//! Library side of the `statusnet` binary: config loading, network
//! generation, the subcommands and the exit-code contract.
//!
//! Exit codes: 0 success, 1 input/IO/numerical failure, 2 a modelling
//! assumption is unmet, 3 an experiment ran and found sign violations.
//! Every failure is reported on stderr as `E:<CODE>: message`.

pub mod commands;
pub mod config;
pub mod generate;
pub mod output;

use statusnet_core::Error;

pub use commands::{cmd_experiment, cmd_generate, cmd_nbar, cmd_solve, ExperimentSummary, GenerateArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{violations} of {checks} sign checks failed")]
    SignViolations { violations: usize, checks: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Schema(_) => 1,
            CliError::Core(e) if e.is_assumption() => 2,
            CliError::Core(_) => 1,
            CliError::SignViolations { .. } => 3,
        }
    }

    /// The machine-readable tag after `E:`.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io(_) => "IO",
            CliError::Schema(_) => "SCHEMA",
            CliError::SignViolations { .. } => "SIGN",
            CliError::Core(e) => core_code(e),
        }
    }

    /// The full stderr line.
    pub fn report(&self) -> String {
        format!("E:{}: {self}", self.code())
    }
}

fn core_code(e: &Error) -> &'static str {
    match e {
        Error::AssumptionOneViolated { .. } => "ASSUMPTION1",
        Error::AssumptionTwoViolated { .. } => "ASSUMPTION2",
        Error::SpectralRadiusViolated { .. } => "SPECTRAL_RADIUS",
        Error::NegativeConsumption { .. } => "NEGATIVE_CONSUMPTION",
        Error::NLessThanNbar { .. } => "N_BELOW_NBAR",
        Error::AssumptionViolatedPostTransfer(_) => "POST_TRANSFER",
        Error::ComparisonInfeasible { .. } => "INFEASIBLE",
        Error::ClampActive { .. } => "CLAMP_ACTIVE",
        Error::PowerIterationDiverged { .. }
        | Error::SolveFailed
        | Error::NoConvergence { .. }
        | Error::Diverged { .. }
        | Error::RootNotBracketed
        | Error::ZeroDerivative
        | Error::DegenerateStatus
        | Error::LemmaInconsistent { .. } => "NUMERIC",
        Error::GenerationFailed { .. } => "GENERATION",
        _ => "INPUT",
    }
}
