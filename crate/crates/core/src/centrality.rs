//! Generalized and standard Bonacich centralities, community densities and
//! the assumption checks that gate the equilibrium.
//!
//! Generalized centrality solves `(I − H) C = v` with
//! `v_k = w_k / (β w_k + 1)`; standard Bonacich centrality solves
//! `(I − Ĝ) C = 1`. Both are direct LU solves. The Neumann series is only
//! used as a test oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::CommunityStructure;
use crate::net::{build_h, members_of, AgentId, Identity, MaskedNetwork, Network, WeightedNetwork};
use crate::spectral::{self, SpectralReport};

/// Threshold above which the uniform-community formula is reported as
/// disagreeing with the walk-sum definition.
pub const LEMMA_TOLERANCE: f64 = 1e-8;

/// Preference parameters: status weight `alpha`, dissonance weight `beta`,
/// status substitutability `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Checks `alpha > gamma > 0` and `beta > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::NonPositiveBeta(self.beta));
        }
        if !(self.gamma > 0.0) || !(self.alpha > self.gamma) || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need alpha > gamma > 0, got alpha = {}, gamma = {}",
                self.alpha, self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityProfile {
    pub c: Vec<f64>,
    pub identities: Vec<Identity>,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `C̄_A / C̄_B`.
    pub z_a: f64,
    /// `C̄_B / C̄_A`.
    pub z_b: f64,
    pub spectral: SpectralReport,
}

impl CentralityProfile {
    fn from_values(c: Vec<f64>, identities: Vec<Identity>, spectral: SpectralReport) -> Self {
        let mean_a = group_mean(&c, &identities, Identity::A);
        let mean_b = group_mean(&c, &identities, Identity::B);
        Self { c, identities, mean_a, mean_b, z_a: mean_a / mean_b, z_b: mean_b / mean_a, spectral }
    }

    pub fn mean(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.mean_a,
            Identity::B => self.mean_b,
        }
    }

    /// `Z_θ = C̄_θ / C̄_{−θ}`.
    pub fn z(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.z_a,
            Identity::B => self.z_b,
        }
    }
}

pub(crate) fn group_mean(values: &[f64], identities: &[Identity], theta: Identity) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(identities)
        .filter(|(_, &t)| t == theta)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
    sum / count as f64
}

/// Income seed `v_k = w_k / (β w_k + 1)`.
pub fn income_seed(net: &Network, beta: f64) -> DVector<f64> {
    DVector::from_iterator(net.len(), net.incomes().iter().map(|&w| w / (beta * w + 1.0)))
}

fn identity_minus(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(m.nrows(), m.ncols()) - m
}

/// Builds `H`, checks Assumption 1 on it and returns both.
pub fn checked_h(net: &Network, params: &ModelParams) -> Result<(WeightedNetwork, SpectralReport)> {
    let h = build_h(net, params)?;
    let report = spectral::radius_default(h.matrix())?;
    if !report.below_one() {
        return Err(Error::AssumptionOneViolated { lambda1: report.lambda1 });
    }
    Ok((h, report))
}

pub fn generalized_centrality(net: &Network, params: &ModelParams) -> Result<CentralityProfile> {
    let (h, report) = checked_h(net, params)?;
    let v = income_seed(net, params.beta);
    let c = identity_minus(h.matrix()).lu().solve(&v).ok_or(Error::SolveFailed)?;
    Ok(CentralityProfile::from_values(c.iter().copied().collect(), net.identities().to_vec(), report))
}

/// `(I − Ĝ)^{-1} 1`.
pub fn standard_bonacich(g: &MaskedNetwork) -> Result<Vec<f64>> {
    let report = spectral::radius_default(g.matrix())?;
    if !report.below_one() {
        return Err(Error::SpectralRadiusViolated { lambda1: report.lambda1 });
    }
    let ones = DVector::from_element(g.len(), 1.0);
    let c = identity_minus(g.matrix()).lu().solve(&ones).ok_or(Error::SolveFailed)?;
    Ok(c.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    /// Indexed by community.
    pub d: Vec<f64>,
}

/// Checks that no link of `g` joins two different communities.
pub fn check_disconnected(g: &MaskedNetwork, assignment: &[usize]) -> Result<()> {
    let m = g.matrix();
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            if m[(j, k)] > 0.0 && assignment[j] != assignment[k] {
                return Err(Error::PartitionNotDisconnected { from: j, to: k });
            }
        }
    }
    Ok(())
}

/// `D_n`: sum of `(I − Ĝ)^{-1}` over pairs inside community `n`.
pub fn community_density(g: &MaskedNetwork, structure: &CommunityStructure) -> Result<DensityProfile> {
    if structure.assignment().len() != g.len() {
        return Err(Error::InvalidStructure(format!(
            "structure covers {} agents, network has {}",
            structure.assignment().len(),
            g.len()
        )));
    }
    check_disconnected(g, structure.assignment())?;
    let bon = standard_bonacich(g)?;
    let mut d = vec![0.0; structure.community_count()];
    for (j, &n) in structure.assignment().iter().enumerate() {
        d[n] += bon[j];
    }
    Ok(DensityProfile { d })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    /// `(α/γ + C̄_θ/C̄_{−θ}) / (α² − γ²)` per agent.
    pub bound: Vec<f64>,
    pub holds: Vec<bool>,
    /// Implied equilibrium consumption `(α² − γ²)/(α + γ Z) · C_j`.
    pub implied_x: Vec<f64>,
    /// Whether `x_j < 1/γ`, the equivalent equilibrium condition.
    pub below_inverse_gamma: Vec<bool>,
}

impl Assumption2Report {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }

    pub fn violators(&self) -> Vec<AgentId> {
        self.holds.iter().enumerate().filter(|(_, &h)| !h).map(|(j, _)| j).collect()
    }
}

pub fn check_assumption_2(profile: &CentralityProfile, params: &ModelParams) -> Assumption2Report {
    let (a, g) = (params.alpha, params.gamma);
    let spread = a * a - g * g;
    let n = profile.c.len();
    let mut report = Assumption2Report {
        bound: Vec::with_capacity(n),
        holds: Vec::with_capacity(n),
        implied_x: Vec::with_capacity(n),
        below_inverse_gamma: Vec::with_capacity(n),
    };
    for (&c, &theta) in profile.c.iter().zip(&profile.identities) {
        let z = profile.z(theta);
        let bound = (a / g + z) / spread;
        let x = spread / (a + g * z) * c;
        report.bound.push(bound);
        report.holds.push(c < bound);
        report.implied_x.push(x);
        report.below_inverse_gamma.push(x < 1.0 / g);
    }
    report
}

/// `∂C_j/∂w_k`, row `j`, column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityJacobian {
    pub d: DMatrix<f64>,
}

impl CentralityJacobian {
    pub fn get(&self, j: AgentId, k: AgentId) -> f64 {
        self.d[(j, k)]
    }

    /// `∂C̄_θ/∂w_k`.
    pub fn group_mean_derivative(&self, identities: &[Identity], theta: Identity, k: AgentId) -> f64 {
        let members = members_of(identities, theta);
        members.iter().map(|&j| self.d[(j, k)]).sum::<f64>() / members.len() as f64
    }
}

/// Analytic income derivatives of generalized centrality.
///
/// Only row `k` of `H` and entry `k` of `v` depend on `w_k`, so with
/// `M = (I − H)^{-1}`
///
/// `∂C/∂w_k = M e_k · (β (Ĝ C)_k + 1) / (β w_k + 1)²`,
///
/// i.e. column `k` of `M` scaled by a positive factor.
pub fn centrality_income_jacobian(net: &Network, params: &ModelParams) -> Result<CentralityJacobian> {
    let (h, _) = checked_h(net, params)?;
    let lu = identity_minus(h.matrix()).lu();
    let v = income_seed(net, params.beta);
    let c = lu.solve(&v).ok_or(Error::SolveFailed)?;
    let m = lu.try_inverse().ok_or(Error::SolveFailed)?;
    let g = crate::net::mask_by_identity(net);
    let gc = g.matrix() * &c;
    let beta = params.beta;
    let mut d = m;
    for k in 0..net.len() {
        let denom = beta * net.income(k) + 1.0;
        let scale = (beta * gc[k] + 1.0) / (denom * denom);
        d.column_mut(k).scale_mut(scale);
    }
    Ok(CentralityJacobian { d })
}

/// Centrality of a uniform-income community in closed form,
/// `C_j = w_n Σ_k (I − Ĝ_n)^{-1}_{jk}`.
///
/// This does not coincide with [`generalized_centrality`] for `β > 0`: for a
/// linkless singleton it gives `w_n`, where the walk-sum definition gives
/// `w_n / (β w_n + 1)`. Use [`check_uniform_community`] to compare the two.
pub fn uniform_community_centrality(community: &MaskedNetwork, income: f64) -> Result<Vec<f64>> {
    if !(income > 0.0) {
        return Err(Error::NonPositiveIncome { agent: 0, income });
    }
    Ok(standard_bonacich(community)?.into_iter().map(|c| income * c).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub members: Vec<AgentId>,
    /// From [`uniform_community_centrality`].
    pub formula: Vec<f64>,
    /// From [`generalized_centrality`] on the full network.
    pub definition: Vec<f64>,
    pub max_discrepancy: f64,
}

impl LemmaCheck {
    pub fn consistent(&self) -> bool {
        self.max_discrepancy <= LEMMA_TOLERANCE
    }

    pub fn verify(self) -> Result<Vec<f64>> {
        if self.consistent() {
            Ok(self.formula)
        } else {
            Err(Error::LemmaInconsistent { max_discrepancy: self.max_discrepancy })
        }
    }
}

/// Runs both centrality pipelines on community `community` of `structure`.
pub fn check_uniform_community(
    net: &Network,
    structure: &CommunityStructure,
    community: usize,
    params: &ModelParams,
) -> Result<LemmaCheck> {
    let members = structure.members(community);
    if members.is_empty() {
        return Err(Error::InvalidStructure(format!("community {community} is empty")));
    }
    let income = net.income(members[0]);
    if members.iter().any(|&j| net.income(j) != income) {
        return Err(Error::NonUniformIncome { community });
    }
    let masked = crate::net::mask_by_identity(net);
    check_disconnected(&masked, structure.assignment())?;
    let formula = uniform_community_centrality(&masked.restrict(&members), income)?;
    let profile = generalized_centrality(net, params)?;
    let definition: Vec<f64> = members.iter().map(|&j| profile.c[j]).collect();
    let max_discrepancy = formula.iter().zip(&definition).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(LemmaCheck { members, formula, definition, max_discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::four_agent;
    use crate::net::{mask_by_identity, Identity::*};

    fn unit() -> ModelParams {
        ModelParams { alpha: 2.0, beta: 1.0, gamma: 1.0 }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2.0, 1.0, 1.0).is_ok());
        assert!(matches!(ModelParams::new(1.0, 1.0, 1.0), Err(Error::InvalidParams(_))));
        assert!(matches!(ModelParams::new(2.0, 0.0, 1.0), Err(Error::NonPositiveBeta(_))));
        assert!(matches!(ModelParams::new(2.0, 1.0, 0.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn empty_network_centrality() {
        let net = Network::new(vec![1.0, 1.0, 3.0], vec![A, B, B], DMatrix::zeros(3, 3)).unwrap();
        let p = generalized_centrality(&net, &unit()).unwrap();
        assert_eq!(p.c[0], 0.5);
        assert_eq!(p.c[1], 0.5);
        assert_eq!(p.c[2], 0.75);
    }

    #[test]
    fn four_agent_fixture_centrality() {
        let p = generalized_centrality(&four_agent(), &unit()).unwrap();
        // h = 0.25: C = 0.5 (1 + h) / (1 - h^2) = 2/3
        assert!(close(p.c[0], 2.0 / 3.0, 1e-15));
        assert!(close(p.c[1], 2.0 / 3.0, 1e-15));
        assert_eq!(p.c[2], 0.5);
        assert_eq!(p.c[3], 0.5);
        assert!(close(p.z_a, 4.0 / 3.0, 1e-15));
        assert!(close(p.z_a * p.z_b, 1.0, 1e-15));
    }

    #[test]
    fn assumption_one_rejects() {
        let mut g = DMatrix::zeros(3, 3);
        g[(0, 1)] = 2.4;
        g[(1, 0)] = 2.4;
        let net = Network::new(vec![1.0; 3], vec![A, A, B], g).unwrap();
        match generalized_centrality(&net, &unit()) {
            Err(Error::AssumptionOneViolated { lambda1 }) => assert!(close(lambda1, 1.2, 1e-10)),
            other => panic!("{other:?}"),
        }
    }

    fn masked(n: usize, entries: &[(usize, usize, f64)]) -> MaskedNetwork {
        let mut g = DMatrix::zeros(n, n);
        for &(j, k, w) in entries {
            g[(j, k)] = w;
        }
        MaskedNetwork::from_parts(g, vec![A; n]).unwrap()
    }

    #[test]
    fn standard_bonacich_examples() {
        assert_eq!(standard_bonacich(&masked(3, &[])).unwrap(), vec![1.0; 3]);
        let pair = standard_bonacich(&masked(2, &[(0, 1, 0.5), (1, 0, 0.5)])).unwrap();
        assert!(close(pair[0], 2.0, 1e-14) && close(pair[1], 2.0, 1e-14));
        let line = standard_bonacich(&masked(3, &[(0, 1, 0.5), (1, 2, 0.5)])).unwrap();
        assert!(close(line[0], 1.75, 1e-14));
        assert!(close(line[1], 1.5, 1e-14));
        assert!(close(line[2], 1.0, 1e-14));
        assert!(matches!(
            standard_bonacich(&masked(2, &[(0, 1, 1.0), (1, 0, 1.0)])),
            Err(Error::SpectralRadiusViolated { .. })
        ));
    }

    fn community_net(
        entries: &[(usize, usize, f64)],
        n: usize,
        assignment: Vec<usize>,
    ) -> (MaskedNetwork, CommunityStructure) {
        let g = masked(n, entries);
        let count = assignment.iter().max().unwrap() + 1;
        let s = CommunityStructure::new_unchecked(assignment, vec![A; count], vec![1.0; count]);
        (g, s)
    }

    #[test]
    fn density_examples() {
        let (g, s) = community_net(&[], 1, vec![0]);
        assert_eq!(community_density(&g, &s).unwrap().d, vec![1.0]);
        let (g, s) = community_net(&[(0, 1, 0.5), (1, 0, 0.5)], 2, vec![0, 0]);
        assert!(close(community_density(&g, &s).unwrap().d[0], 4.0, 1e-14));
        let (g, s) = community_net(&[], 2, vec![0, 0]);
        assert_eq!(community_density(&g, &s).unwrap().d, vec![2.0]);
        let (g, s) = community_net(&[(0, 1, 0.5)], 2, vec![0, 1]);
        assert_eq!(community_density(&g, &s), Err(Error::PartitionNotDisconnected { from: 0, to: 1 }));
    }

    #[test]
    fn assumption_two_examples() {
        let p = generalized_centrality(&four_agent(), &unit()).unwrap();
        let r = check_assumption_2(&p, &unit());
        assert!(close(r.bound[0], 10.0 / 9.0, 1e-14));
        assert!(close(r.bound[2], 11.0 / 12.0, 1e-14));
        assert!(r.all_hold());
        assert!(r.below_inverse_gamma.iter().all(|&b| b));

        let tight = ModelParams { alpha: 1.01, beta: 1.0, gamma: 1.0 };
        let profile =
            CentralityProfile::from_values(vec![150.0, 50.0, 100.0, 100.0], vec![A, A, B, B], p.spectral.clone());
        let r = check_assumption_2(&profile, &tight);
        assert!(close(r.bound[0], 100.0, 1e-9));
        // the bound is strict, so C = 100 fails it
        assert_eq!(r.holds, vec![false, true, false, false]);
        assert_eq!(r.violators()[0], 0);
        // the two forms of the condition agree
        assert_eq!(r.holds, r.below_inverse_gamma);
    }

    #[test]
    fn jacobian_empty_network() {
        let net = Network::new(vec![1.0; 3], vec![A, A, B], DMatrix::zeros(3, 3)).unwrap();
        let jac = centrality_income_jacobian(&net, &unit()).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(jac.get(j, k), if j == k { 0.25 } else { 0.0 });
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences_on_pair() {
        let net = four_agent();
        let params = unit();
        let jac = centrality_income_jacobian(&net, &params).unwrap();
        for k in 0..4 {
            let h = 1e-6 * net.income(k).max(1.0);
            let up = generalized_centrality(&net.with_income(k, net.income(k) + h).unwrap(), &params).unwrap();
            let dn = generalized_centrality(&net.with_income(k, net.income(k) - h).unwrap(), &params).unwrap();
            for j in 0..4 {
                let fd = (up.c[j] - dn.c[j]) / (2.0 * h);
                let a = jac.get(j, k);
                assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-4), "({j},{k}) {a} vs {fd}");
            }
        }
        // cross-identity entries vanish
        assert_eq!(jac.get(0, 2), 0.0);
        assert_eq!(jac.get(2, 0), 0.0);
    }

    #[test]
    fn uniform_community_formula() {
        assert_eq!(uniform_community_centrality(&masked(1, &[]), 3.0).unwrap(), vec![3.0]);
        let pair = masked(2, &[(0, 1, 0.5), (1, 0, 0.5)]);
        let c = uniform_community_centrality(&pair, 1.0).unwrap();
        assert!(close(c[0], 2.0, 1e-14));
        let c = uniform_community_centrality(&pair, 2.0).unwrap();
        assert!(close(c[1], 4.0, 1e-14));
    }

    #[test]
    fn uniform_community_cross_check_flags_disagreement() {
        // communities {0,1} (A, linked) and {2}, {3} (B singletons)
        let net = four_agent();
        let s = CommunityStructure::new_unchecked(vec![0, 0, 1, 2], vec![A, B, B], vec![1.0; 3]);
        let check = check_uniform_community(&net, &s, 0, &unit()).unwrap();
        // formula gives 2, the walk-sum definition gives 2/3
        assert!(close(check.formula[0], 2.0, 1e-14));
        assert!(close(check.definition[0], 2.0 / 3.0, 1e-14));
        assert!(!check.consistent());
        assert!(matches!(check.verify(), Err(Error::LemmaInconsistent { .. })));

        let single = check_uniform_community(&net, &s, 1, &unit()).unwrap();
        assert!(close(single.max_discrepancy, 0.5, 1e-15));

        // small beta does not close the gap: the definition tends to w, not w C^bon
        let tiny = ModelParams { alpha: 2.0, beta: 1e-9, gamma: 1.0 };
        let check = check_uniform_community(&net, &s, 0, &tiny).unwrap();
        assert!((check.definition[0] - 1.0).abs() < 1e-8);
        assert!((check.max_discrepancy - 1.0).abs() < 1e-8);
    }

    #[test]
    fn uniform_community_rejects_mixed_income() {
        let net = four_agent().with_income(1, 2.0).unwrap();
        let s = CommunityStructure::new_unchecked(vec![0, 0, 1, 2], vec![A, B, B], vec![1.0; 3]);
        assert_eq!(check_uniform_community(&net, &s, 0, &unit()), Err(Error::NonUniformIncome { community: 0 }));
    }

    #[test]
    fn masked_pipeline_matches_network_mask() {
        let net = four_agent();
        let m = mask_by_identity(&net);
        assert_eq!(standard_bonacich(&m).unwrap()[2], 1.0);
    }
}
