//! Communities networks, income transfers between communities and the
//! inequality experiment.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{community_density, generalized_centrality, ModelParams};
use crate::compstat::{self, ExpectedSign, SignRow, SOLVER_TOL};
use crate::equilibrium::solve_closed_form;
use crate::error::{Error, Result};
use crate::net::{mask_by_identity, reachable_from, AgentId, Identity, MaskedNetwork, Network};
use crate::spectral;

/// Partition of the agents into single-identity communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityStructure {
    assignment: Vec<usize>,
    identities: Vec<Identity>,
    incomes: Vec<f64>,
    size: usize,
    n_per_identity: usize,
}

impl CommunityStructure {
    /// Skips the equal-size and equal-count checks; used for hand-built
    /// partitions in tests.
    #[cfg(test)]
    pub(crate) fn new_unchecked(assignment: Vec<usize>, identities: Vec<Identity>, incomes: Vec<f64>) -> Self {
        let size = assignment.iter().filter(|&&c| c == 0).count();
        let n_per_identity = identities.iter().filter(|&&t| t == Identity::A).count();
        Self { assignment, identities, incomes, size, n_per_identity }
    }

    /// Recovers the community structure of a network: the connected
    /// components of `Ĝ`, which must be strongly connected, equal in size,
    /// split evenly between identities and uniform in income.
    pub fn infer(net: &Network) -> Result<Self> {
        let g = mask_by_identity(net);
        let n = net.len();
        let m = g.matrix();
        // weakly connected components, numbered by smallest member
        let mut assignment = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if assignment[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            assignment[start] = count;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if (m[(u, v)] > 0.0 || m[(v, u)] > 0.0) && assignment[v] == usize::MAX {
                        assignment[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }

        let mut members = vec![Vec::new(); count];
        for (j, &c) in assignment.iter().enumerate() {
            members[c].push(j);
        }
        let size = members[0].len();
        if members.iter().any(|c| c.len() != size) {
            return Err(Error::InvalidStructure("communities differ in size".into()));
        }
        let identities: Vec<Identity> = members.iter().map(|c| net.identity(c[0])).collect();
        let n_a = identities.iter().filter(|&&t| t == Identity::A).count();
        if 2 * n_a != count {
            return Err(Error::InvalidStructure(format!(
                "{n_a} communities of identity A and {} of identity B",
                count - n_a
            )));
        }
        let mut incomes = Vec::with_capacity(count);
        for (c, list) in members.iter().enumerate() {
            let w = net.income(list[0]);
            if list.iter().any(|&j| net.income(j) != w) {
                return Err(Error::NonUniformIncome { community: c });
            }
            incomes.push(w);
            if !strongly_connected(&g.restrict(list)) {
                return Err(Error::NotStronglyConnected { community: c });
            }
        }
        Ok(Self { assignment, identities, incomes, size, n_per_identity: n_a })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, j: AgentId) -> usize {
        self.assignment[j]
    }

    pub fn community_count(&self) -> usize {
        self.identities.len()
    }

    /// `N`, the number of communities of each identity.
    pub fn n_per_identity(&self) -> usize {
        self.n_per_identity
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn identity(&self, community: usize) -> Identity {
        self.identities[community]
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn income(&self, community: usize) -> f64 {
        self.incomes[community]
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn members(&self, community: usize) -> Vec<AgentId> {
        self.assignment.iter().enumerate().filter(|(_, &c)| c == community).map(|(j, _)| j).collect()
    }

    pub fn communities_of(&self, theta: Identity) -> Vec<usize> {
        (0..self.community_count()).filter(|&c| self.identities[c] == theta).collect()
    }

    /// Per-agent incomes implied by per-community incomes.
    pub fn agent_incomes(&self, community_incomes: &[f64]) -> Vec<f64> {
        self.assignment.iter().map(|&c| community_incomes[c]).collect()
    }

    pub fn with_incomes(&self, incomes: Vec<f64>) -> Self {
        Self { incomes, ..self.clone() }
    }
}

fn strongly_connected(block: &MaskedNetwork) -> bool {
    let n = block.len();
    if n <= 1 {
        return true;
    }
    if !reachable_from(block, 0).iter().all(|&r| r) {
        return false;
    }
    let transposed = block.matrix().transpose();
    reachable_from(&transposed, 0).iter().all(|&r| r)
}

/// Link pattern inside one community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    /// Every ordered pair linked.
    Complete { weight: f64 },
    /// Directed cycle `0 -> 1 -> ... -> size-1 -> 0`.
    Ring { weight: f64 },
    /// Agent 0 linked to and from every other member.
    StarWithBacklink { weight: f64 },
}

impl Topology {
    pub fn weight(&self) -> f64 {
        match *self {
            Topology::Complete { weight } | Topology::Ring { weight } | Topology::StarWithBacklink { weight } => weight,
        }
    }

    pub fn block(&self, size: usize) -> DMatrix<f64> {
        let w = self.weight();
        let mut b = DMatrix::zeros(size, size);
        if size < 2 {
            return b;
        }
        match self {
            Topology::Complete { .. } => {
                b.fill(w);
                b.fill_diagonal(0.0);
            }
            Topology::Ring { .. } => {
                for i in 0..size {
                    b[(i, (i + 1) % size)] = w;
                }
            }
            Topology::StarWithBacklink { .. } => {
                for i in 1..size {
                    b[(0, i)] = w;
                    b[(i, 0)] = w;
                }
            }
        }
        b
    }
}

/// Generator settings for a communities network. Community `c` has identity
/// A when `c` is even and B otherwise; topologies and incomes are assigned
/// cyclically, so a single entry applies to every community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunitiesSpec {
    /// Communities per identity.
    pub n: usize,
    pub size: usize,
    pub topology: Vec<Topology>,
    pub incomes: Vec<f64>,
    /// Probability of each cross-identity link. These links never enter `Ĝ`.
    #[serde(default)]
    pub cross_links: f64,
    #[serde(default = "default_cross_weight")]
    pub cross_weight: f64,
}

fn default_cross_weight() -> f64 {
    0.1
}

impl CommunitiesSpec {
    pub fn uniform(n: usize, size: usize, topology: Topology, income: f64) -> Self {
        Self { n, size, topology: vec![topology], incomes: vec![income], cross_links: 0.0, cross_weight: 0.1 }
    }
}

pub fn build_communities(spec: &CommunitiesSpec, seed: u64) -> Result<(Network, CommunityStructure)> {
    if spec.n == 0 || spec.size == 0 {
        return Err(Error::InvalidStructure("need at least one community of at least one agent".into()));
    }
    if spec.topology.is_empty() || spec.incomes.is_empty() {
        return Err(Error::InvalidStructure("topology and incomes must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&spec.cross_links) {
        return Err(Error::InvalidStructure(format!("cross_links = {} is not a probability", spec.cross_links)));
    }
    let count = 2 * spec.n;
    let total = count * spec.size;
    let mut links = DMatrix::zeros(total, total);
    let mut identities = Vec::with_capacity(total);
    let mut incomes = Vec::with_capacity(total);
    let mut assignment = Vec::with_capacity(total);
    let mut community_ids = Vec::with_capacity(count);
    let mut community_incomes = Vec::with_capacity(count);
    for c in 0..count {
        let theta = if c % 2 == 0 { Identity::A } else { Identity::B };
        let w = spec.incomes[c % spec.incomes.len()];
        let block = spec.topology[c % spec.topology.len()].block(spec.size);
        let offset = c * spec.size;
        links.view_mut((offset, offset), (spec.size, spec.size)).copy_from(&block);
        identities.extend(std::iter::repeat_n(theta, spec.size));
        incomes.extend(std::iter::repeat_n(w, spec.size));
        assignment.extend(std::iter::repeat_n(c, spec.size));
        community_ids.push(theta);
        community_incomes.push(w);
    }
    if spec.cross_links > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..total {
            for k in 0..total {
                if identities[j] != identities[k] && rng.random::<f64>() < spec.cross_links {
                    links[(j, k)] = spec.cross_weight;
                }
            }
        }
    }
    let net = Network::new(incomes, identities, links)?;
    let structure = CommunityStructure {
        assignment,
        identities: community_ids,
        incomes: community_incomes,
        size: spec.size,
        n_per_identity: spec.n,
    };
    let g = mask_by_identity(&net);
    for c in 0..count {
        if !strongly_connected(&g.restrict(&structure.members(c))) {
            return Err(Error::NotStronglyConnected { community: c });
        }
    }
    let report = spectral::radius_default(g.matrix())?;
    if !report.below_one() {
        return Err(Error::SpectralRadiusViolated { lambda1: report.lambda1 });
    }
    Ok((net, structure))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub donor: usize,
    pub recipient: usize,
    /// Income moved per agent.
    pub epsilon: f64,
}

/// Per-community incomes after moving `epsilon` from donor to recipient.
///
/// The ranking counts as flipped if the donor ends up strictly poorer than
/// the recipient after starting strictly richer, or if a strict ranking
/// becomes a tie. A tie before the transfer may be broken either way.
pub fn apply_transfer(structure: &CommunityStructure, spec: &TransferSpec) -> Result<Vec<f64>> {
    let count = structure.community_count();
    let TransferSpec { donor, recipient, epsilon } = *spec;
    if donor >= count || recipient >= count {
        return Err(Error::InvalidTransfer(format!("community index out of range 0..{count}")));
    }
    if donor == recipient {
        return Err(Error::InvalidTransfer("donor and recipient coincide".into()));
    }
    if structure.identity(donor) != structure.identity(recipient) {
        return Err(Error::InvalidTransfer("donor and recipient differ in identity".into()));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidTransfer(format!("epsilon = {epsilon}")));
    }
    let (wd, wr) = (structure.income(donor), structure.income(recipient));
    let (nd, nr) = (wd - epsilon, wr + epsilon);
    if !(nd > 0.0) {
        return Err(Error::NegativeIncome { community: donor, income: nd, epsilon });
    }
    let before = wd.partial_cmp(&wr).expect("finite incomes");
    let after = nd.partial_cmp(&nr).expect("finite incomes");
    if before != std::cmp::Ordering::Equal && after != before {
        return Err(Error::RankingFlipped { donor, recipient });
    }
    let mut incomes = structure.incomes().to_vec();
    incomes[donor] = nd;
    incomes[recipient] = nr;
    Ok(incomes)
}

/// One point of a user-supplied density-by-income table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPoint {
    pub income: f64,
    pub density: f64,
}

/// Piecewise-linear interpolation of a density table, clamped at the ends.
pub fn interpolate_density(table: &[DensityPoint], income: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::InvalidStructure("empty density profile".into()));
    }
    let mut points = table.to_vec();
    points.sort_by(|a, b| a.income.total_cmp(&b.income));
    if income <= points[0].income {
        return Ok(points[0].density);
    }
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if income <= b.income {
            if b.income == a.income {
                return Ok(b.density);
            }
            let t = (income - a.income) / (b.income - a.income);
            return Ok(a.density + t * (b.density - a.density));
        }
    }
    Ok(points[points.len() - 1].density)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityOptions {
    /// Densities to predict the sign in unaffected communities from. When
    /// absent the network's own community densities are used.
    #[serde(default)]
    pub density_profile: Option<Vec<DensityPoint>>,
    #[serde(default)]
    pub experiment_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    #[serde(flatten)]
    pub sign: SignRow,
    pub density: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    pub x_before: f64,
    pub x_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub rows: Vec<InequalityRow>,
    pub n_bar: usize,
    /// Rows with a strict sign prediction.
    pub checks: usize,
    pub violations: usize,
    /// Rows in unaffected communities whose predicted effect is zero.
    pub ties: usize,
    /// Tie rows whose |Δx| exceeded the no-effect threshold.
    pub tie_effects: usize,
}

impl InequalityReport {
    pub fn ties_have_no_effect(&self) -> bool {
        self.tie_effects == 0
    }
}

/// Relative gap below which two densities count as tied.
const DENSITY_TIE: f64 = 1e-12;

pub fn inequality_experiment(
    net: &Network,
    structure: &CommunityStructure,
    params: &ModelParams,
    spec: &TransferSpec,
    options: &InequalityOptions,
) -> Result<InequalityReport> {
    let masked = mask_by_identity(net);
    let density = community_density(&masked, structure)?;
    let nbar = compstat::n_bar(net, structure, params)?;
    let required = nbar.n_bar + 1;
    if structure.n_per_identity() < required {
        return Err(Error::NLessThanNbar { n: structure.n_per_identity(), required });
    }
    let new_incomes = apply_transfer(structure, spec)?;
    let baseline = solve_closed_form(net, params)?;
    let shocked_net = net.with_incomes(structure.agent_incomes(&new_incomes))?;
    let shocked = solve_closed_form(&shocked_net, params).map_err(|e| {
        if e.is_assumption() {
            Error::AssumptionViolatedPostTransfer(Box::new(e))
        } else {
            e
        }
    })?;
    let after_structure = structure.with_incomes(new_incomes);
    let totals_before = group_total_consumption(net, structure, params)?;
    let totals_after = group_total_consumption(&shocked_net, &after_structure, params)?;

    let expected_density = |c: usize| -> Result<f64> {
        match &options.density_profile {
            Some(table) => interpolate_density(table, structure.income(c)),
            None => Ok(density.d[c]),
        }
    };
    let (d_donor, d_recipient) = (expected_density(spec.donor)?, expected_density(spec.recipient)?);
    let tied = (d_donor - d_recipient).abs() <= DENSITY_TIE * d_donor.abs().max(d_recipient.abs());
    let others_sign = if tied {
        ExpectedSign::Zero
    } else if d_recipient < d_donor {
        ExpectedSign::Positive
    } else {
        ExpectedSign::Negative
    };

    let theta = structure.identity(spec.donor);
    let id = options.experiment_id.clone().unwrap_or_else(|| format!("transfer_{}_{}", spec.donor, spec.recipient));
    let mut report =
        InequalityReport { rows: Vec::new(), n_bar: nbar.n_bar, checks: 0, violations: 0, ties: 0, tie_effects: 0 };
    for j in 0..net.len() {
        if net.identity(j) != theta {
            continue;
        }
        let c = structure.community_of(j);
        let expected = if c == spec.donor {
            ExpectedSign::Negative
        } else if c == spec.recipient {
            ExpectedSign::Positive
        } else {
            others_sign
        };
        let sign = SignRow::new(&id, j, theta, c, baseline.x[j], shocked.x[j], expected);
        match expected {
            ExpectedSign::Zero => {
                report.ties += 1;
                if !sign.sign_ok {
                    report.tie_effects += 1;
                }
            }
            _ => {
                report.checks += 1;
                if !sign.sign_ok {
                    report.violations += 1;
                }
            }
        }
        report.rows.push(InequalityRow {
            sign,
            density: density.d[c],
            phi_before: totals_before.phi(theta),
            phi_after: totals_after.phi(theta),
            x_before: totals_before.total(theta),
            x_after: totals_after.total(theta),
        });
    }
    Ok(report)
}

/// Group aggregates on a communities network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupTotals {
    pub x_a: f64,
    pub x_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl GroupTotals {
    pub fn total(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.x_a,
            Identity::B => self.x_b,
        }
    }

    pub fn phi(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.phi_a,
            Identity::B => self.phi_b,
        }
    }
}

/// `X = (α² − γ²) C̄_other φ / (α C̄_other + γ (2/J) φ)`.
pub fn total_consumption_from_phi(phi: f64, mean_other: f64, agents: usize, params: &ModelParams) -> f64 {
    let (a, g) = (params.alpha, params.gamma);
    let scale = 2.0 / agents as f64;
    (a * a - g * g) * mean_other * phi / (a * mean_other + g * scale * phi)
}

/// `dX/dφ = X (1/φ − 1/(α C̄_other J/(2γ) + φ))`, positive for every `φ > 0`.
pub fn total_consumption_derivative(phi: f64, mean_other: f64, agents: usize, params: &ModelParams) -> f64 {
    let x = total_consumption_from_phi(phi, mean_other, agents, params);
    let shift = params.alpha * mean_other * agents as f64 / (2.0 * params.gamma);
    x * (1.0 / phi - 1.0 / (shift + phi))
}

fn totals_from_phi(phi_a: f64, phi_b: f64, agents: usize, params: &ModelParams) -> GroupTotals {
    let scale = 2.0 / agents as f64;
    GroupTotals {
        x_a: total_consumption_from_phi(phi_a, scale * phi_b, agents, params),
        x_b: total_consumption_from_phi(phi_b, scale * phi_a, agents, params),
        phi_a,
        phi_b,
    }
}

/// Group totals from the density formula, `φ_θ = Σ_{n ∈ θ} w_n D_n`, with
/// the other group's average centrality taken as `(2/J) φ_{−θ}`.
pub fn group_total_consumption(
    net: &Network,
    structure: &CommunityStructure,
    params: &ModelParams,
) -> Result<GroupTotals> {
    let density = community_density(&mask_by_identity(net), structure)?;
    let mut phi = [0.0; 2];
    for c in 0..structure.community_count() {
        let slot = structure.identity(c) as usize;
        phi[slot] += structure.income(c) * density.d[c];
    }
    Ok(totals_from_phi(phi[0], phi[1], net.len(), params))
}

/// The same aggregates with `φ_θ` replaced by the summed generalized
/// centrality of group `θ`, which is what the equilibrium actually depends on.
pub fn effective_group_totals(net: &Network, params: &ModelParams) -> Result<GroupTotals> {
    let profile = generalized_centrality(net, params)?;
    let mut phi = [0.0; 2];
    for (c, t) in profile.c.iter().zip(net.identities()) {
        phi[*t as usize] += c;
    }
    Ok(totals_from_phi(phi[0], phi[1], net.len(), params))
}

/// Group means of generalized centrality next to the density formula
/// `(2/J) Σ_{n ∈ θ} w_n D_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityIdentityCheck {
    pub mean_a: f64,
    pub mean_b: f64,
    pub formula_a: f64,
    pub formula_b: f64,
}

impl DensityIdentityCheck {
    pub fn max_discrepancy(&self) -> f64 {
        (self.mean_a - self.formula_a).abs().max((self.mean_b - self.formula_b).abs())
    }
}

pub fn check_centrality_density(
    net: &Network,
    structure: &CommunityStructure,
    params: &ModelParams,
) -> Result<DensityIdentityCheck> {
    let profile = generalized_centrality(net, params)?;
    let totals = group_total_consumption(net, structure, params)?;
    let scale = 2.0 / net.len() as f64;
    Ok(DensityIdentityCheck {
        mean_a: profile.mean_a,
        mean_b: profile.mean_b,
        formula_a: scale * totals.phi_a,
        formula_b: scale * totals.phi_b,
    })
}

/// `Σ_j x*_j` over each identity from the equilibrium solver.
pub fn solver_group_totals(net: &Network, params: &ModelParams) -> Result<(f64, f64)> {
    let sol = solve_closed_form(net, params)?;
    let mut totals = (0.0, 0.0);
    for (x, t) in sol.x.iter().zip(net.identities()) {
        match t {
            Identity::A => totals.0 += x,
            Identity::B => totals.1 += x,
        }
    }
    Ok(totals)
}

/// The no-effect threshold for tie rows and the wrong-direction threshold
/// for strict rows.
pub fn sign_threshold() -> f64 {
    10.0 * SOLVER_TOL
}
