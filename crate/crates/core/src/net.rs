//! Weighted directed networks with two identity groups.
//!
//! A [`Network`] holds the raw link matrix `G`. Only within-identity links
//! matter for behaviour, so most computations run on the identity-masked
//! matrix ([`MaskedNetwork`]) or on its income-weighted version
//! ([`WeightedNetwork`], the matrix `H`).

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::centrality::ModelParams;
use crate::error::{Error, Result};
use crate::spectral;

pub type AgentId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Identity {
    A,
    B,
}

impl Identity {
    pub fn other(self) -> Identity {
        match self {
            Identity::A => Identity::B,
            Identity::B => Identity::A,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::A => f.write_str("A"),
            Identity::B => f.write_str("B"),
        }
    }
}

/// Anything backed by a square non-negative adjacency matrix.
pub trait Adjacency {
    fn adjacency(&self) -> &DMatrix<f64>;
}

impl Adjacency for DMatrix<f64> {
    fn adjacency(&self) -> &DMatrix<f64> {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    incomes: Vec<f64>,
    identities: Vec<Identity>,
    links: DMatrix<f64>,
}

impl Network {
    pub fn new(incomes: Vec<f64>, identities: Vec<Identity>, links: DMatrix<f64>) -> Result<Self> {
        let n = incomes.len();
        if identities.len() != n {
            return Err(Error::InvalidNetwork(format!("{} incomes but {} identities", n, identities.len())));
        }
        if links.nrows() != n || links.ncols() != n {
            return Err(Error::InvalidNetwork(format!(
                "link matrix is {}x{}, expected {n}x{n}",
                links.nrows(),
                links.ncols()
            )));
        }
        for (agent, &income) in incomes.iter().enumerate() {
            if !(income > 0.0) || !income.is_finite() {
                return Err(Error::NonPositiveIncome { agent, income });
            }
        }
        for j in 0..n {
            if links[(j, j)] != 0.0 {
                return Err(Error::SelfLink(j));
            }
            for k in 0..n {
                let g = links[(j, k)];
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::InvalidNetwork(format!("link {j} -> {k} has weight {g}")));
                }
            }
        }
        if !identities.contains(&Identity::A) || !identities.contains(&Identity::B) {
            return Err(Error::InvalidNetwork("both identity groups must be non-empty".into()));
        }
        Ok(Self { incomes, identities, links })
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn links(&self) -> &DMatrix<f64> {
        &self.links
    }

    pub fn income(&self, j: AgentId) -> f64 {
        self.incomes[j]
    }

    pub fn identity(&self, j: AgentId) -> Identity {
        self.identities[j]
    }

    pub fn link(&self, j: AgentId, k: AgentId) -> f64 {
        self.links[(j, k)]
    }

    pub fn members(&self, theta: Identity) -> Vec<AgentId> {
        members_of(&self.identities, theta)
    }

    pub fn check_agent(&self, j: AgentId) -> Result<()> {
        if j >= self.len() {
            return Err(Error::AgentOutOfRange { agent: j, len: self.len() });
        }
        Ok(())
    }

    pub fn with_incomes(&self, incomes: Vec<f64>) -> Result<Network> {
        Network::new(incomes, self.identities.clone(), self.links.clone())
    }

    pub fn with_income(&self, j: AgentId, income: f64) -> Result<Network> {
        self.check_agent(j)?;
        let mut incomes = self.incomes.clone();
        incomes[j] = income;
        self.with_incomes(incomes)
    }

    pub fn with_links(&self, links: DMatrix<f64>) -> Result<Network> {
        Network::new(self.incomes.clone(), self.identities.clone(), links)
    }

    pub fn with_link(&self, j: AgentId, k: AgentId, weight: f64) -> Result<Network> {
        self.check_agent(j)?;
        self.check_agent(k)?;
        let mut links = self.links.clone();
        links[(j, k)] = weight;
        self.with_links(links)
    }

    /// Total outgoing link weight of `j`.
    pub fn out_degree(&self, j: AgentId) -> f64 {
        self.links.row(j).sum()
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile::from(self);
        let mut s = serde_json::to_string_pretty(&file).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let file: NetworkFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

pub(crate) fn members_of(identities: &[Identity], theta: Identity) -> Vec<AgentId> {
    identities.iter().enumerate().filter(|(_, &t)| t == theta).map(|(j, _)| j).collect()
}

/// `Ĝ`: `G` with every cross-identity link erased.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedNetwork {
    matrix: DMatrix<f64>,
    identities: Vec<Identity>,
}

impl MaskedNetwork {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    /// Builds a masked network directly from a matrix, erasing any
    /// cross-identity entries.
    pub fn from_parts(matrix: DMatrix<f64>, identities: Vec<Identity>) -> Result<Self> {
        let n = identities.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidNetwork(format!(
                "matrix is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidNetwork("negative or non-finite weight".into()));
        }
        Ok(mask_matrix(&matrix, identities))
    }

    /// The sub-network on `members`, in the given order.
    pub fn restrict(&self, members: &[AgentId]) -> MaskedNetwork {
        let m = members.len();
        let matrix = DMatrix::from_fn(m, m, |a, b| self.matrix[(members[a], members[b])]);
        let identities = members.iter().map(|&j| self.identities[j]).collect();
        MaskedNetwork { matrix, identities }
    }
}

impl Adjacency for MaskedNetwork {
    fn adjacency(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// `H[j][k] = β w_j / (β w_j + 1) · Ĝ[j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    matrix: DMatrix<f64>,
}

impl WeightedNetwork {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Adjacency for WeightedNetwork {
    fn adjacency(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

fn mask_matrix(g: &DMatrix<f64>, identities: Vec<Identity>) -> MaskedNetwork {
    let n = identities.len();
    let matrix = DMatrix::from_fn(n, n, |j, k| if identities[j] == identities[k] { g[(j, k)] } else { 0.0 });
    MaskedNetwork { matrix, identities }
}

pub fn mask_by_identity(net: &Network) -> MaskedNetwork {
    mask_matrix(&net.links, net.identities.clone())
}

/// The income weight `β w / (β w + 1)` applied to row `j` of `Ĝ`.
pub fn income_weight(beta: f64, w: f64) -> f64 {
    beta * w / (beta * w + 1.0)
}

pub fn build_h(net: &Network, params: &ModelParams) -> Result<WeightedNetwork> {
    if !(params.beta > 0.0) || !params.beta.is_finite() {
        return Err(Error::NonPositiveBeta(params.beta));
    }
    for (agent, &income) in net.incomes.iter().enumerate() {
        if !(income > 0.0) {
            return Err(Error::NonPositiveIncome { agent, income });
        }
    }
    let masked = mask_by_identity(net);
    let mut matrix = masked.matrix;
    for (j, mut row) in matrix.row_iter_mut().enumerate() {
        row *= income_weight(params.beta, net.incomes[j]);
    }
    Ok(WeightedNetwork { matrix })
}

/// Spectral radius of a non-negative square matrix; see [`spectral::radius`].
pub fn spectral_radius<M: Adjacency + ?Sized>(m: &M, tol: f64, max_iter: usize) -> Result<spectral::SpectralReport> {
    spectral::radius(m.adjacency(), tol, max_iter)
}

/// Share of `j`'s outgoing link weight that stays within `j`'s identity group.
pub fn homophily_index(net: &Network, j: AgentId) -> Result<f64> {
    net.check_agent(j)?;
    let theta = net.identity(j);
    let mut same = 0.0;
    let mut total = 0.0;
    for k in 0..net.len() {
        let g = net.link(j, k);
        total += g;
        if net.identity(k) == theta {
            same += g;
        }
    }
    if total <= 0.0 {
        return Err(Error::IsolatedAgent(j));
    }
    Ok(same / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomophilyDelta {
    Raising,
    Lowering,
    Neutral,
}

/// Outcome of [`swap_link`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSwap {
    pub network: Network,
    pub delta: HomophilyDelta,
    /// Whether the identity-masked network changed. Neutral swaps between two
    /// cross-identity targets leave `Ĝ` untouched; neutral swaps between two
    /// same-identity targets rewire it.
    pub masked_changed: bool,
}

/// Moves the weight of link `j -> k` onto the absent link `j -> l`.
pub fn swap_link(net: &Network, j: AgentId, k: AgentId, l: AgentId) -> Result<LinkSwap> {
    net.check_agent(j)?;
    net.check_agent(k)?;
    net.check_agent(l)?;
    if l == j {
        return Err(Error::SelfLink(j));
    }
    let weight = net.link(j, k);
    if weight <= 0.0 {
        return Err(Error::NoSuchLink { from: j, to: k });
    }
    if net.link(j, l) > 0.0 {
        return Err(Error::LinkAlreadyExists { from: j, to: l });
    }
    let mut links = net.links.clone();
    links[(j, k)] = 0.0;
    links[(j, l)] = weight;
    let network = net.with_links(links)?;

    let theta = net.identity(j);
    let k_same = net.identity(k) == theta;
    let l_same = net.identity(l) == theta;
    let delta = match (k_same, l_same) {
        (false, true) => HomophilyDelta::Raising,
        (true, false) => HomophilyDelta::Lowering,
        _ => HomophilyDelta::Neutral,
    };
    Ok(LinkSwap { network, delta, masked_changed: k_same || l_same })
}

/// True iff a directed walk of length at least one leads from `from` to `to`
/// along positive entries.
pub fn has_walk<M: Adjacency + ?Sized>(m: &M, from: AgentId, to: AgentId) -> bool {
    let a = m.adjacency();
    let n = a.nrows();
    if from >= n || to >= n {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for k in 0..n {
        if a[(from, k)] > 0.0 && !seen[k] {
            seen[k] = true;
            queue.push_back(k);
        }
    }
    while let Some(u) = queue.pop_front() {
        if u == to {
            return true;
        }
        for k in 0..n {
            if a[(u, k)] > 0.0 && !seen[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        }
    }
    false
}

/// Agents reachable from `from` by walks of length zero or more.
pub fn reachable_from<M: Adjacency + ?Sized>(m: &M, from: AgentId) -> Vec<bool> {
    let a = m.adjacency();
    let n = a.nrows();
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for k in 0..n {
            if a[(u, k)] > 0.0 && !seen[k] {
                seen[k] = true;
                stack.push(k);
            }
        }
    }
    seen
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentRecord {
    id: usize,
    income: f64,
    identity: Identity,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    agents: Vec<AgentRecord>,
    links: Vec<(usize, usize, f64)>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let agents =
            (0..net.len()).map(|j| AgentRecord { id: j, income: net.income(j), identity: net.identity(j) }).collect();
        let mut links = Vec::new();
        for j in 0..net.len() {
            for k in 0..net.len() {
                let g = net.link(j, k);
                if g > 0.0 {
                    links.push((j, k, g));
                }
            }
        }
        NetworkFile { agents, links }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Network> {
        let n = file.agents.len();
        let mut incomes = vec![f64::NAN; n];
        let mut identities = vec![None; n];
        for a in &file.agents {
            if a.id >= n {
                return Err(Error::Json(format!("agent id {} outside 0..{n}", a.id)));
            }
            if identities[a.id].is_some() {
                return Err(Error::Json(format!("duplicate agent id {}", a.id)));
            }
            incomes[a.id] = a.income;
            identities[a.id] = Some(a.identity);
        }
        let identities: Vec<Identity> = identities.into_iter().map(|t| t.expect("ids are dense")).collect();
        let mut links = DMatrix::zeros(n, n);
        let mut seen = std::collections::HashSet::new();
        for &(from, to, weight) in &file.links {
            if from >= n || to >= n {
                return Err(Error::Json(format!("link {from} -> {to} references a missing agent")));
            }
            if !seen.insert((from, to)) {
                return Err(Error::Json(format!("duplicate link {from} -> {to}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::Json(format!("link {from} -> {to} has non-positive weight {weight}")));
            }
            links[(from, to)] = weight;
        }
        Network::new(incomes, identities, links)
    }
}
