//! Generated networks, scaled so that `ρ(H) ≤ 0.9` for the run's
//! parameters.

use statusnet_core::centrality::{check_assumption_2, generalized_centrality, ModelParams};
use statusnet_core::generate::{random_block, rescale_to_radius, TARGET_RADIUS};
use statusnet_core::inequality::{build_communities, CommunitiesSpec, CommunityStructure, Topology};
use statusnet_core::{Error, Network};

use crate::config::Generated;
use crate::CliError;

const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct GeneratedNetwork {
    pub network: Network,
    /// Present for communities networks.
    pub structure: Option<CommunityStructure>,
    /// `ρ(H)` after scaling.
    pub radius: f64,
    pub assumption_2: bool,
}

pub fn generate(kind: &Generated, params: &ModelParams, seed: u64) -> Result<GeneratedNetwork, CliError> {
    params.validate()?;
    let (raw, structure) = match kind {
        Generated::Communities(spec) => {
            let (net, s) = communities_below_unit_radius(spec, seed)?;
            (net, Some(s))
        }
        Generated::RandomBlock(spec) => (random_block(spec, seed)?, None),
    };
    let (network, radius) = rescale_to_radius(&raw, params, TARGET_RADIUS)?;
    let profile = generalized_centrality(&network, params)?;
    let assumption_2 = check_assumption_2(&profile, params).all_hold();
    log::info!("generated {} agents, rho(H) = {radius:.6}, assumption 2 holds: {assumption_2}", network.len());
    Ok(GeneratedNetwork { network, structure, radius, assumption_2 })
}

/// Community densities need `ρ(Ĝ) < 1`, which is stricter than the target
/// on `H`; block weights are shrunk until the builder accepts them.
fn communities_below_unit_radius(spec: &CommunitiesSpec, seed: u64) -> Result<(Network, CommunityStructure), CliError> {
    let mut spec = spec.clone();
    for _ in 0..MAX_ATTEMPTS {
        match build_communities(&spec, seed) {
            Ok(built) => return Ok(built),
            Err(Error::SpectralRadiusViolated { lambda1 }) => {
                let factor = TARGET_RADIUS / lambda1;
                for t in spec.topology.iter_mut() {
                    *t = scaled(*t, factor);
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::GenerationFailed { attempts: MAX_ATTEMPTS }.into())
}

fn scaled(t: Topology, factor: f64) -> Topology {
    match t {
        Topology::Complete { weight } => Topology::Complete { weight: weight * factor },
        Topology::Ring { weight } => Topology::Ring { weight: weight * factor },
        Topology::StarWithBacklink { weight } => Topology::StarWithBacklink { weight: weight * factor },
    }
}
