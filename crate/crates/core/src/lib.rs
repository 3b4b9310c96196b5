//! Equilibria and comparative statics of a network game in which agents
//! consume a status good, conform to same-identity neighbours and derive
//! status from their identity group's relative consumption.
//!
//! The main entry points are [`generalized_centrality`],
//! [`solve_closed_form`] and its prestige and square-root variants, the
//! best-response oracles used to cross-check them, and the experiment
//! runners in [`compstat`] and [`inequality`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod altmodel;
pub mod centrality;
pub mod compstat;
pub mod equilibrium;
pub mod error;
pub mod generate;
pub mod inequality;
pub mod net;
pub mod spectral;

pub use altmodel::{alt_best_response_oracle, solve_alt, solve_quintic_y, AltEquilibrium, AltParams};
pub use centrality::{
    centrality_income_jacobian, check_assumption_2, community_density, generalized_centrality, standard_bonacich,
    uniform_community_centrality, CentralityProfile, DensityProfile, ModelParams,
};
pub use compstat::{homophily_swap_effect, n_bar, prop2_experiment, slutsky_decomposition};
pub use equilibrium::{
    best_response_oracle, group_status, solve_closed_form, solve_closed_form_prestige, utility, EquilibriumSolution,
    PrestigeParams,
};
pub use error::{Error, Result};
pub use inequality::{
    apply_transfer, build_communities, group_total_consumption, inequality_experiment, CommunityStructure, Topology,
    TransferSpec,
};
pub use net::{
    build_h, has_walk, homophily_index, mask_by_identity, spectral_radius, swap_link, AgentId, Identity, MaskedNetwork,
    Network, WeightedNetwork,
};
pub use spectral::SpectralReport;
