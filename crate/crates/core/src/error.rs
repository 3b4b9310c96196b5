use crate::net::{AgentId, Identity};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("agent {agent} has non-positive income {income}")]
    NonPositiveIncome { agent: AgentId, income: f64 },
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("agent {agent} out of range for a network of {len} agents")]
    AgentOutOfRange { agent: AgentId, len: usize },

    #[error("agent {0} has no outgoing links")]
    IsolatedAgent(AgentId),
    #[error("no link {from} -> {to}")]
    NoSuchLink { from: AgentId, to: AgentId },
    #[error("link {from} -> {to} already exists")]
    LinkAlreadyExists { from: AgentId, to: AgentId },
    #[error("self link at agent {0}")]
    SelfLink(AgentId),

    #[error("power iteration and dense eigensolve both failed after {iterations} iterations")]
    PowerIterationDiverged { iterations: usize },
    #[error("spectral radius of H is {lambda1}, Assumption 1 requires it below 1")]
    AssumptionOneViolated { lambda1: f64 },
    #[error("Assumption 2 fails for agents {agents:?}")]
    AssumptionTwoViolated { agents: Vec<AgentId> },
    #[error("spectral radius of the masked network is {lambda1}, must be below 1")]
    SpectralRadiusViolated { lambda1: f64 },
    #[error("linear solve failed: (I - H) is singular")]
    SolveFailed,

    #[error("partition is not disconnected: link {from} -> {to} crosses communities")]
    PartitionNotDisconnected { from: AgentId, to: AgentId },
    #[error("community {community} has non-uniform income")]
    NonUniformIncome { community: usize },
    #[error("uniform-community centrality disagrees with the walk-sum definition by {max_discrepancy:e}")]
    LemmaInconsistent { max_discrepancy: f64 },
    #[error("invalid community structure: {0}")]
    InvalidStructure(String),
    #[error("community {community} is not strongly connected")]
    NotStronglyConnected { community: usize },

    #[error("group {group} has alpha - gamma * Y = {margin} <= 0")]
    NegativeConsumption { group: Identity, margin: f64 },
    #[error("group status is 0/0: a group has zero mean consumption and no prestige")]
    DegenerateStatus,
    #[error("best-response iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("best-response iteration diverged at sweep {iteration} (|x| = {norm:e})")]
    Diverged { iteration: usize, norm: f64 },
    #[error("non-negativity clamp active at the fixed point for agents {agents:?}")]
    ClampActive { agents: Vec<AgentId> },

    #[error("no same-community pair has a non-zero own-centrality derivative")]
    ZeroDerivative,
    #[error("{n} communities per identity, but at least {required} are needed")]
    NLessThanNbar { n: usize, required: usize },

    #[error("transfer of {epsilon} leaves community {community} with income {income}")]
    NegativeIncome { community: usize, income: f64, epsilon: f64 },
    #[error("transfer flips the income ranking of communities {donor} and {recipient}")]
    RankingFlipped { donor: usize, recipient: usize },
    #[error("invalid transfer: {0}")]
    InvalidTransfer(String),
    #[error("assumptions fail after the transfer: {0}")]
    AssumptionViolatedPostTransfer(Box<Error>),

    #[error("no sign change found while bracketing the status root")]
    RootNotBracketed,
    #[error("square-root comparison term undefined at the solution for agent {agent}")]
    ComparisonInfeasible { agent: AgentId },

    #[error("generated network still fails the spectral target after {attempts} rescalings")]
    GenerationFailed { attempts: usize },

    #[error("malformed network file: {0}")]
    Json(String),
}

impl Error {
    /// True for errors that mean a modelling premise is unmet rather than a
    /// malformed input or numerical failure.
    pub fn is_assumption(&self) -> bool {
        matches!(
            self,
            Error::AssumptionOneViolated { .. }
                | Error::AssumptionTwoViolated { .. }
                | Error::SpectralRadiusViolated { .. }
                | Error::NegativeConsumption { .. }
                | Error::NLessThanNbar { .. }
                | Error::AssumptionViolatedPostTransfer(_)
                | Error::ComparisonInfeasible { .. }
                | Error::ClampActive { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
