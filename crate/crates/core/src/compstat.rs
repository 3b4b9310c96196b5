//! Comparative statics: the two-channel decomposition of income effects,
//! the minimum community count, income shocks to one community and
//! homophily link swaps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::centrality::{centrality_income_jacobian, generalized_centrality, ModelParams};
use crate::equilibrium::{solve_closed_form, solve_closed_form_with, SolveOptions};
use crate::error::{Error, Result};
use crate::inequality::CommunityStructure;
use crate::net::{mask_by_identity, swap_link, AgentId, HomophilyDelta, Identity, Network};

/// Tolerance attributed to equilibrium solves when judging signs.
pub const SOLVER_TOL: f64 = 1e-10;

/// Deltas beyond this in the wrong direction count as violations.
pub fn violation_threshold() -> f64 {
    10.0 * SOLVER_TOL
}

/// Relative step for central differences on incomes.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedSign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
}

impl ExpectedSign {
    /// Whether `delta` is consistent with this sign: not beyond the
    /// threshold in the wrong direction, or within it for [`Zero`].
    ///
    /// [`Zero`]: ExpectedSign::Zero
    pub fn accepts(self, delta: f64) -> bool {
        let t = violation_threshold();
        match self {
            ExpectedSign::Positive => delta > -t,
            ExpectedSign::Negative => delta < t,
            ExpectedSign::Zero => delta.abs() < t,
        }
    }
}

impl fmt::Display for ExpectedSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpectedSign::Positive => "+",
            ExpectedSign::Negative => "-",
            ExpectedSign::Zero => "0",
        })
    }
}

/// One agent's response in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRow {
    pub experiment_id: String,
    pub agent_id: AgentId,
    pub identity: Identity,
    pub community: usize,
    pub baseline_x: f64,
    pub shocked_x: f64,
    pub delta: f64,
    pub expected_sign: ExpectedSign,
    pub sign_ok: bool,
}

impl SignRow {
    pub fn new(
        experiment_id: &str,
        agent: AgentId,
        identity: Identity,
        community: usize,
        baseline_x: f64,
        shocked_x: f64,
        expected: ExpectedSign,
    ) -> Self {
        let delta = shocked_x - baseline_x;
        Self {
            experiment_id: experiment_id.to_string(),
            agent_id: agent,
            identity,
            community,
            baseline_x,
            shocked_x,
            delta,
            expected_sign: expected,
            sign_ok: expected.accepts(delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompStatReport {
    pub target: AgentId,
    pub shocked: AgentId,
    /// Finite-difference step on `w_k`.
    pub step: f64,
    /// `dx*_j/dw_k` by central differences.
    pub total: f64,
    pub own_channel: f64,
    pub group_channel: f64,
    pub analytic_total: f64,
}

impl CompStatReport {
    pub fn relative_gap(&self) -> f64 {
        (self.total - self.analytic_total).abs() / self.analytic_total.abs().max(1.0)
    }
}

/// Splits `dx*_j/dw_k` into the effect through `C_j` and the effect through
/// the group averages.
///
/// For `θ_j = θ_k` the group channel runs through `C̄_θ`; for `θ_j ≠ θ_k`
/// `C_j` cannot move and the whole effect runs through `C̄_{−θ}`.
pub fn slutsky_decomposition(net: &Network, params: &ModelParams, j: AgentId, k: AgentId) -> Result<CompStatReport> {
    net.check_agent(j)?;
    net.check_agent(k)?;
    let sol = solve_closed_form(net, params)?;
    let profile = generalized_centrality(net, params)?;
    let jac = centrality_income_jacobian(net, params)?;
    let theta = net.identity(j);
    let (a, g) = (params.alpha, params.gamma);
    let z = profile.z(theta);
    let denom = a + g * z;
    let other_mean = profile.mean(theta.other());
    let xj = sol.x[j];
    let (own_channel, group_channel) = if net.identity(k) == theta {
        let own = (a * a - g * g) / denom * jac.get(j, k);
        let d_mean = jac.group_mean_derivative(net.identities(), theta, k);
        (own, -(g / other_mean) * d_mean * xj / denom)
    } else {
        let d_other = jac.group_mean_derivative(net.identities(), theta.other(), k);
        (0.0, xj * g * z / (other_mean * denom) * d_other)
    };

    let w = net.income(k);
    let h = FD_STEP * w.max(1.0);
    let relaxed = SolveOptions { enforce_assumptions: false };
    let up = solve_closed_form_with(&net.with_income(k, w + h)?, params, &relaxed)?;
    let dn = solve_closed_form_with(&net.with_income(k, w - h)?, params, &relaxed)?;
    Ok(CompStatReport {
        target: j,
        shocked: k,
        step: h,
        total: (up.x[j] - dn.x[j]) / (2.0 * h),
        own_channel,
        group_channel,
        analytic_total: own_channel + group_channel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRhs {
    pub j: AgentId,
    pub k: AgentId,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbarReport {
    pub n_bar: usize,
    pub binding_pair: (AgentId, AgentId),
    pub rhs_values: Vec<PairRhs>,
}

/// Smallest community count `N̄` such that `dx*_j/dw_k > 0` for every pair
/// sharing a community, i.e. the least integer strictly above
///
/// `(γ / C̄_{−θ}) (1/(α² − γ²)) (dC̄ⁿ/dw_k) / (dC_j/dw_k) x*_j`
///
/// over all such pairs, where `C̄ⁿ` is the average centrality in the pair's
/// community. Pairs with `dC_j/dw_k = 0` are skipped.
pub fn n_bar(net: &Network, structure: &CommunityStructure, params: &ModelParams) -> Result<NbarReport> {
    if structure.assignment().len() != net.len() {
        return Err(Error::InvalidStructure("structure does not match the network".into()));
    }
    let sol = solve_closed_form(net, params)?;
    let profile = generalized_centrality(net, params)?;
    let jac = centrality_income_jacobian(net, params)?;
    let (a, g) = (params.alpha, params.gamma);
    let mut rhs_values = Vec::new();
    for c in 0..structure.community_count() {
        let members = structure.members(c);
        let theta = structure.identity(c);
        let other_mean = profile.mean(theta.other());
        for &k in &members {
            let d_comm = members.iter().map(|&m| jac.get(m, k)).sum::<f64>() / members.len() as f64;
            for &j in &members {
                let own = jac.get(j, k);
                if own <= 0.0 {
                    continue;
                }
                let rhs = g / other_mean / (a * a - g * g) * d_comm / own * sol.x[j];
                rhs_values.push(PairRhs { j, k, rhs });
            }
        }
    }
    let binding = rhs_values.iter().max_by(|p, q| p.rhs.total_cmp(&q.rhs)).ok_or(Error::ZeroDerivative)?;
    Ok(NbarReport { n_bar: binding.rhs.floor() as usize + 1, binding_pair: (binding.j, binding.k), rhs_values })
}

/// Agents in two communities that differ only in income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomePairCheck {
    pub poorer: AgentId,
    pub richer: AgentId,
    pub impact_poorer: f64,
    pub impact_richer: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub rows: Vec<SignRow>,
    pub income_pairs: Vec<IncomePairCheck>,
    pub n_bar: usize,
    pub epsilon: f64,
    pub checks: usize,
    pub violations: usize,
}

/// Raises the income of every member of `shocked_community` by `epsilon`
/// (default 1% of its income) and checks the direction of every response:
/// down for the same identity elsewhere, up inside the community, up for
/// the other identity. Outside the community, the size of the response must
/// grow with income; this is checked on pairs of communities with the same
/// identity and link pattern but different incomes.
pub fn prop2_experiment(
    net: &Network,
    structure: &CommunityStructure,
    params: &ModelParams,
    shocked_community: usize,
    epsilon: Option<f64>,
) -> Result<Prop2Report> {
    if shocked_community >= structure.community_count() {
        return Err(Error::InvalidStructure(format!("no community {shocked_community}")));
    }
    let nb = n_bar(net, structure, params)?;
    let required = nb.n_bar + 1;
    if structure.n_per_identity() < required {
        return Err(Error::NLessThanNbar { n: structure.n_per_identity(), required });
    }
    let eps = epsilon.unwrap_or(0.01 * structure.income(shocked_community));
    if !(eps > 0.0) {
        return Err(Error::InvalidParams(format!("income step must be positive, got {eps}")));
    }
    let base = solve_closed_form(net, params)?;
    let mut incomes = net.incomes().to_vec();
    for j in structure.members(shocked_community) {
        incomes[j] += eps;
    }
    let shocked = solve_closed_form(&net.with_incomes(incomes)?, params)?;

    let theta = structure.identity(shocked_community);
    let id = format!("prop2_c{shocked_community}");
    let mut rows = Vec::with_capacity(net.len());
    for j in 0..net.len() {
        let c = structure.community_of(j);
        let expected = if net.identity(j) != theta || c == shocked_community {
            ExpectedSign::Positive
        } else {
            ExpectedSign::Negative
        };
        rows.push(SignRow::new(&id, j, net.identity(j), c, base.x[j], shocked.x[j], expected));
    }

    let masked = mask_by_identity(net);
    let mut income_pairs = Vec::new();
    let others: Vec<usize> = (0..structure.community_count()).filter(|&c| c != shocked_community).collect();
    for (i, &c1) in others.iter().enumerate() {
        for &c2 in &others[i + 1..] {
            if structure.identity(c1) != structure.identity(c2) || structure.income(c1) == structure.income(c2) {
                continue;
            }
            let (m1, m2) = (structure.members(c1), structure.members(c2));
            if masked.restrict(&m1) != masked.restrict(&m2) {
                continue;
            }
            let (poor, rich) = if structure.income(c1) < structure.income(c2) { (m1, m2) } else { (m2, m1) };
            for (&p, &r) in poor.iter().zip(&rich) {
                let impact_poorer = (shocked.x[p] - base.x[p]) / eps;
                let impact_richer = (shocked.x[r] - base.x[r]) / eps;
                let ok = impact_richer.abs() > impact_poorer.abs() - violation_threshold() / eps;
                income_pairs.push(IncomePairCheck { poorer: p, richer: r, impact_poorer, impact_richer, ok });
            }
        }
    }

    let violations = rows.iter().filter(|r| !r.sign_ok).count() + income_pairs.iter().filter(|p| !p.ok).count();
    Ok(Prop2Report {
        checks: rows.len() + income_pairs.len(),
        violations,
        rows,
        income_pairs,
        n_bar: nb.n_bar,
        epsilon: eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapReport {
    pub swap: (AgentId, AgentId, AgentId),
    pub delta: HomophilyDelta,
    pub masked_changed: bool,
    /// `ΔC` for every agent.
    pub dc: Vec<f64>,
    /// `Δx*` for every agent.
    pub dx: Vec<f64>,
    /// Members of the swapping agent's identity group.
    pub group: Vec<AgentId>,
    /// Centrality deltas in the group have the predicted sign. Always true
    /// for neutral swaps that rewire within the group, which carry no
    /// prediction.
    pub centrality_ok: bool,
    /// Consumption of the other group moves with the change in the
    /// swapping group's average centrality.
    pub consumption_ok: bool,
}

/// Moves link `j -> k` to `j -> l` and records the change in centrality and
/// equilibrium consumption.
pub fn homophily_swap_effect(
    net: &Network,
    params: &ModelParams,
    j: AgentId,
    k: AgentId,
    l: AgentId,
) -> Result<SwapReport> {
    let swap = swap_link(net, j, k, l)?;
    let before = generalized_centrality(net, params)?;
    let after = generalized_centrality(&swap.network, params)?;
    let relaxed = SolveOptions { enforce_assumptions: false };
    let x0 = solve_closed_form_with(net, params, &relaxed)?;
    let x1 = solve_closed_form_with(&swap.network, params, &relaxed)?;
    let dc: Vec<f64> = after.c.iter().zip(&before.c).map(|(a, b)| a - b).collect();
    let dx: Vec<f64> = x1.x.iter().zip(&x0.x).map(|(a, b)| a - b).collect();
    let theta = net.identity(j);
    let group = net.members(theta);
    let t = violation_threshold();
    let centrality_ok = match (swap.delta, swap.masked_changed) {
        (HomophilyDelta::Raising, _) => group.iter().all(|&m| dc[m] > -t),
        (HomophilyDelta::Lowering, _) => group.iter().all(|&m| dc[m] < t),
        (HomophilyDelta::Neutral, false) => dc.iter().all(|d| d.abs() < t),
        (HomophilyDelta::Neutral, true) => true,
    };
    let d_mean = after.mean(theta) - before.mean(theta);
    let consumption_ok = net.members(theta.other()).iter().all(|&m| {
        if d_mean > t {
            dx[m] > -t
        } else if d_mean < -t {
            dx[m] < t
        } else {
            dx[m].abs() < t
        }
    });
    Ok(SwapReport {
        swap: (j, k, l),
        delta: swap.delta,
        masked_changed: swap.masked_changed,
        dc,
        dx,
        group,
        centrality_ok,
        consumption_ok,
    })
}

/// All valid swaps `(j, k, l)`: `G[j][k] > 0`, `G[j][l] = 0`, `l ∉ {j, k}`.
pub fn valid_swaps(net: &Network) -> Vec<(AgentId, AgentId, AgentId)> {
    let n = net.len();
    let mut out = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if net.link(j, k) <= 0.0 {
                continue;
            }
            for l in 0..n {
                if l != j && l != k && net.link(j, l) == 0.0 {
                    out.push((j, k, l));
                }
            }
        }
    }
    out
}
