//! Seeded random networks. All randomness comes from `ChaCha8Rng` seeded
//! with `seed_from_u64`, which gives the same stream on every platform.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::ModelParams;
use crate::error::{Error, Result};
use crate::net::{build_h, Identity, Network};
use crate::spectral;

/// Largest `ρ(H)` a generated network may have.
pub const TARGET_RADIUS: f64 = 0.9;
const MAX_RESCALES: usize = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-block random network: each ordered pair is linked with probability
/// `p_within` inside an identity group and `p_cross` across.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBlockSpec {
    pub agents: usize,
    /// Share of agents with identity A; both groups always get at least one.
    #[serde(default = "half")]
    pub frac_a: f64,
    pub p_within: f64,
    #[serde(default)]
    pub p_cross: f64,
    /// Link weights are uniform on `[lo, hi]`.
    pub weight: (f64, f64),
    /// Incomes are uniform on `[lo, hi]`.
    pub income: (f64, f64),
}

fn half() -> f64 {
    0.5
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

pub fn random_block(spec: &RandomBlockSpec, seed: u64) -> Result<Network> {
    if spec.agents < 2 {
        return Err(Error::InvalidNetwork("need at least two agents".into()));
    }
    for p in [spec.p_within, spec.p_cross, spec.frac_a] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("{p} is not a probability")));
        }
    }
    if !(spec.income.0 > 0.0) || spec.income.1 < spec.income.0 || spec.weight.0 < 0.0 || spec.weight.1 < spec.weight.0 {
        return Err(Error::InvalidParams("income and weight ranges must be ordered, incomes positive".into()));
    }
    let mut rng = rng(seed);
    let n = spec.agents;
    let n_a = ((spec.frac_a * n as f64).round() as usize).clamp(1, n - 1);
    let identities: Vec<Identity> = (0..n).map(|j| if j < n_a { Identity::A } else { Identity::B }).collect();
    let incomes: Vec<f64> = (0..n).map(|_| uniform(&mut rng, spec.income)).collect();
    let mut links = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let p = if identities[j] == identities[k] { spec.p_within } else { spec.p_cross };
            if rng.random::<f64>() < p {
                let w = uniform(&mut rng, spec.weight);
                if w > 0.0 {
                    links[(j, k)] = w;
                }
            }
        }
    }
    Network::new(incomes, identities, links)
}

/// Scales all link weights down until `ρ(H) ≤ target`. `H` is linear in the
/// link weights, so one step normally suffices.
pub fn rescale_to_radius(net: &Network, params: &ModelParams, target: f64) -> Result<(Network, f64)> {
    let mut current = net.clone();
    for _ in 0..MAX_RESCALES {
        let rho = spectral::radius_default(build_h(&current, params)?.matrix())?.lambda1;
        if rho <= target {
            return Ok((current, rho));
        }
        let factor = target / rho * (1.0 - 1e-9);
        current = current.with_links(current.links() * factor)?;
    }
    Err(Error::GenerationFailed { attempts: MAX_RESCALES })
}

/// Random preference parameters with `α/γ ∈ [1.5, 4]`.
pub fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let gamma = rng.random_range(0.2..=1.0);
    let ratio = rng.random_range(1.5..=4.0);
    let beta = rng.random_range(0.2..=2.0);
    ModelParams { alpha: gamma * ratio, beta, gamma }
}
