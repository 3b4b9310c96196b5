//! Equilibrium consumption: closed forms for the base and prestige models,
//! utilities, group status and a damped best-response iteration used as an
//! independent oracle.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::centrality::{
    check_assumption_2, generalized_centrality, group_mean, income_seed, CentralityProfile, ModelParams,
};
use crate::error::{Error, Result};
use crate::net::{build_h, mask_by_identity, AgentId, Identity, MaskedNetwork, Network};
use crate::spectral;

/// Exogenous group prestige added to mean consumption in group status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrestigeParams {
    #[serde(rename = "P_A")]
    pub p_a: f64,
    #[serde(rename = "P_B")]
    pub p_b: f64,
}

impl PrestigeParams {
    pub fn new(p_a: f64, p_b: f64) -> Result<Self> {
        let p = Self { p_a, p_b };
        p.validate()?;
        Ok(p)
    }

    /// Both positive, or both zero.
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_a.is_finite()
            && self.p_b.is_finite()
            && ((self.p_a > 0.0 && self.p_b > 0.0) || (self.p_a == 0.0 && self.p_b == 0.0));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "prestige must be positive for both groups (or zero for both), got P_A = {}, P_B = {}",
                self.p_a, self.p_b
            )))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p_a == 0.0 && self.p_b == 0.0
    }

    pub fn get(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.p_a,
            Identity::B => self.p_b,
        }
    }

    pub fn with(&self, theta: Identity, value: f64) -> Self {
        match theta {
            Identity::A => Self { p_a: value, ..*self },
            Identity::B => Self { p_b: value, ..*self },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    BestResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    pub a1: bool,
    /// Per agent.
    pub a2: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub model: String,
    pub x: Vec<f64>,
    #[serde(rename = "Y_A")]
    pub y_a: f64,
    #[serde(rename = "Y_B")]
    pub y_b: f64,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub method: SolveMethod,
    pub residual: f64,
    pub assumptions: AssumptionFlags,
}

impl EquilibriumSolution {
    pub fn status(&self, theta: Identity) -> f64 {
        match theta {
            Identity::A => self.y_a,
            Identity::B => self.y_b,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Fail with [`Error::AssumptionTwoViolated`] instead of returning a
    /// solution outside the model's valid region.
    pub enforce_assumptions: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { enforce_assumptions: true }
    }
}

/// `R = Ĝ x`.
pub fn reference_points(g: &MaskedNetwork, x: &[f64]) -> Vec<f64> {
    let xv = DVector::from_column_slice(x);
    (g.matrix() * xv).iter().copied().collect()
}

/// `(Y_A, Y_B)` from mean consumption, plus prestige when given.
pub fn group_status(x: &[f64], identities: &[Identity], prestige: Option<&PrestigeParams>) -> Result<(f64, f64)> {
    let (pa, pb) = prestige.map_or((0.0, 0.0), |p| (p.p_a, p.p_b));
    let a = group_mean(x, identities, Identity::A) + pa;
    let b = group_mean(x, identities, Identity::B) + pb;
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::DegenerateStatus);
    }
    Ok((a / b, b / a))
}

fn status_of(theta: Identity, y: (f64, f64)) -> f64 {
    match theta {
        Identity::A => y.0,
        Identity::B => y.1,
    }
}

/// Utility of agent `j` at a given status level for its group.
pub fn utility_given_status(net: &Network, params: &ModelParams, x: &[f64], j: AgentId, status: f64) -> f64 {
    let r: f64 = (0..net.len()).filter(|&k| net.identity(k) == net.identity(j)).map(|k| net.link(j, k) * x[k]).sum();
    let xj = x[j];
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    a * xj + status - g * xj * status - 0.5 * b * (xj - r).powi(2) - xj * xj / (2.0 * net.income(j))
}

/// Utility of agent `j` at consumption profile `x`, with status computed
/// from `x`.
pub fn utility(
    net: &Network,
    params: &ModelParams,
    x: &[f64],
    j: AgentId,
    prestige: Option<&PrestigeParams>,
) -> Result<f64> {
    net.check_agent(j)?;
    let y = group_status(x, net.identities(), prestige)?;
    Ok(utility_given_status(net, params, x, j, status_of(net.identity(j), y)))
}

/// Unclamped best response `v_j (α − γ Y_θj + β R_j)`.
fn raw_best_response(
    seed: &[f64],
    params: &ModelParams,
    identities: &[Identity],
    r: &[f64],
    y: (f64, f64),
) -> Vec<f64> {
    (0..seed.len())
        .map(|j| seed[j] * (params.alpha - params.gamma * status_of(identities[j], y) + params.beta * r[j]))
        .collect()
}

/// Best response to `x` at status `y`, clamped at zero.
pub fn best_response(net: &Network, params: &ModelParams, x: &[f64], y: (f64, f64)) -> Vec<f64> {
    let g = mask_by_identity(net);
    let seed: Vec<f64> = income_seed(net, params.beta).iter().copied().collect();
    let r = reference_points(&g, x);
    raw_best_response(&seed, params, net.identities(), &r, y).into_iter().map(|b| b.max(0.0)).collect()
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Base-model consumption `(α² − γ²)/(α + γ C̄_own/C̄_other) · C_j`.
pub fn closed_form_consumption(c_j: f64, mean_own: f64, mean_other: f64, params: &ModelParams) -> f64 {
    let (a, g) = (params.alpha, params.gamma);
    (a * a - g * g) / (a + g * mean_own / mean_other) * c_j
}

#[allow(clippy::too_many_arguments)]
fn finish(
    net: &Network,
    params: &ModelParams,
    model: &str,
    x: Vec<f64>,
    y: (f64, f64),
    method: SolveMethod,
    residual: Option<f64>,
    a1: bool,
    a2: Vec<bool>,
) -> EquilibriumSolution {
    let g = mask_by_identity(net);
    let r = reference_points(&g, &x);
    let u = (0..net.len()).map(|j| utility_given_status(net, params, &x, j, status_of(net.identity(j), y))).collect();
    let residual = residual.unwrap_or_else(|| sup_distance(&x, &best_response(net, params, &x, y)));
    EquilibriumSolution {
        model: model.to_string(),
        x,
        y_a: y.0,
        y_b: y.1,
        r,
        u,
        method,
        residual,
        assumptions: AssumptionFlags { a1, a2 },
    }
}

pub fn solve_closed_form(net: &Network, params: &ModelParams) -> Result<EquilibriumSolution> {
    solve_closed_form_with(net, params, &SolveOptions::default())
}

pub fn solve_closed_form_with(net: &Network, params: &ModelParams, opts: &SolveOptions) -> Result<EquilibriumSolution> {
    params.validate()?;
    let profile = generalized_centrality(net, params)?;
    solve_from_profile(net, params, &profile, opts)
}

/// Closed form from an already computed centrality profile.
pub fn solve_from_profile(
    net: &Network,
    params: &ModelParams,
    profile: &CentralityProfile,
    opts: &SolveOptions,
) -> Result<EquilibriumSolution> {
    let a2 = check_assumption_2(profile, params);
    if opts.enforce_assumptions && !a2.all_hold() {
        return Err(Error::AssumptionTwoViolated { agents: a2.violators() });
    }
    let (a, g) = (params.alpha, params.gamma);
    let spread = a * a - g * g;
    let x: Vec<f64> =
        profile.c.iter().zip(net.identities()).map(|(&c, &t)| spread / (a + g * profile.z(t)) * c).collect();
    let y = ((a * profile.z_a + g) / (a + g * profile.z_a), (a * profile.z_b + g) / (a + g * profile.z_b));
    Ok(finish(net, params, "base", x, y, SolveMethod::ClosedForm, None, true, a2.holds))
}

pub fn solve_closed_form_prestige(
    net: &Network,
    params: &ModelParams,
    prestige: &PrestigeParams,
) -> Result<EquilibriumSolution> {
    solve_closed_form_prestige_with(net, params, prestige, &SolveOptions::default())
}

/// Prestige closed form
/// `Y_θ = (α C̄_θ + γ C̄_{−θ} + P_θ) / (α C̄_{−θ} + γ C̄_θ + P_{−θ})`,
/// `x_j = (α − γ Y_θj) C_j`.
///
/// Zero prestige is routed through the base closed form so that both give
/// identical output.
pub fn solve_closed_form_prestige_with(
    net: &Network,
    params: &ModelParams,
    prestige: &PrestigeParams,
    opts: &SolveOptions,
) -> Result<EquilibriumSolution> {
    prestige.validate()?;
    params.validate()?;
    let profile = generalized_centrality(net, params)?;
    if prestige.is_zero() {
        let mut sol = solve_from_profile(net, params, &profile, opts)?;
        sol.model = "prestige".into();
        return Ok(sol);
    }
    let y = prestige_status(&profile, params, prestige);
    for theta in [Identity::A, Identity::B] {
        let margin = params.alpha - params.gamma * status_of(theta, y);
        if !(margin > 0.0) {
            return Err(Error::NegativeConsumption { group: theta, margin });
        }
    }
    let x: Vec<f64> = profile
        .c
        .iter()
        .zip(net.identities())
        .map(|(&c, &t)| (params.alpha - params.gamma * status_of(t, y)) * c)
        .collect();
    let a2: Vec<bool> = x.iter().map(|&v| v < 1.0 / params.gamma).collect();
    if opts.enforce_assumptions && a2.iter().any(|&h| !h) {
        let agents = a2.iter().enumerate().filter(|(_, &h)| !h).map(|(j, _)| j).collect();
        return Err(Error::AssumptionTwoViolated { agents });
    }
    Ok(finish(net, params, "prestige", x, y, SolveMethod::ClosedForm, None, true, a2))
}

/// The general prestige status formula, also valid at zero prestige.
pub fn prestige_status(profile: &CentralityProfile, params: &ModelParams, prestige: &PrestigeParams) -> (f64, f64) {
    let (a, g) = (params.alpha, params.gamma);
    let (ca, cb) = (profile.mean_a, profile.mean_b);
    let num_a = a * ca + g * cb + prestige.p_a;
    let num_b = a * cb + g * ca + prestige.p_b;
    (num_a / num_b, num_b / num_a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `d` in `x ← (1 − d) x + d BR(x)`.
    pub damping: f64,
    /// Starting profile; zeros when absent.
    pub start: Option<Vec<f64>>,
    /// Fail if the zero clamp binds at the fixed point
    /// ([`Error::ClampActive`]) or if the fixed point was reached on a
    /// network violating Assumption 1 ([`Error::AssumptionOneViolated`]).
    pub enforce_assumptions: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, damping: 0.5, start: None, enforce_assumptions: true }
    }
}

/// Sweeps between damping checks.
const DAMPING_WINDOW: usize = 50;
/// Damping is never reduced below `damping / DAMPING_FLOOR`.
const DAMPING_FLOOR: f64 = 64.0;
const DIVERGENCE_NORM: f64 = 1e12;

/// Damped best-response iteration with status recomputed every sweep.
///
/// Status is seeded at `Y_A = Y_B = 1` while a group's mean consumption is
/// still zero. The damping is halved whenever the residual fails to shrink
/// over a window of sweeps.
pub fn best_response_oracle(
    net: &Network,
    params: &ModelParams,
    prestige: Option<&PrestigeParams>,
    opts: &OracleOptions,
) -> Result<EquilibriumSolution> {
    params.validate()?;
    if let Some(p) = prestige {
        p.validate()?;
    }
    let prestige = prestige.filter(|p| !p.is_zero());
    let n = net.len();
    let g = mask_by_identity(net);
    let seed: Vec<f64> = income_seed(net, params.beta).iter().copied().collect();
    let mut x = match &opts.start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => {
            return Err(Error::InvalidParams(format!("start has {} entries, network has {n}", s.len())));
        }
        None => vec![0.0; n],
    };
    let status = |x: &[f64]| group_status(x, net.identities(), prestige).unwrap_or((1.0, 1.0));

    let mut d = opts.damping;
    let d_min = opts.damping / DAMPING_FLOOR;
    let mut checkpoint = f64::INFINITY;
    let mut converged = None;
    for it in 0..=opts.max_iter {
        let y = status(&x);
        let r = reference_points(&g, &x);
        let br: Vec<f64> =
            raw_best_response(&seed, params, net.identities(), &r, y).into_iter().map(|b| b.max(0.0)).collect();
        let residual = sup_distance(&x, &br);
        if residual < opts.tol {
            converged = Some((y, residual));
            break;
        }
        let norm = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() || !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Diverged { iteration: it, norm });
        }
        if it == opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
        if it % DAMPING_WINDOW == 0 {
            if residual >= checkpoint {
                d = (0.5 * d).max(d_min);
            }
            checkpoint = residual;
        }
        for (xi, bi) in x.iter_mut().zip(&br) {
            *xi += d * (bi - *xi);
        }
    }
    let (y, residual) = converged.expect("loop exits through convergence or an error");

    let r = reference_points(&g, &x);
    let raw = raw_best_response(&seed, params, net.identities(), &r, y);
    let clamped: Vec<AgentId> = raw.iter().enumerate().filter(|(_, &b)| b < 0.0).map(|(j, _)| j).collect();
    if opts.enforce_assumptions && !clamped.is_empty() {
        return Err(Error::ClampActive { agents: clamped });
    }
    let lambda1 = spectral::radius_default(build_h(net, params)?.matrix())?.lambda1;
    let a1 = lambda1 < 1.0 - spectral::ASSUMPTION_MARGIN;
    if opts.enforce_assumptions && !a1 {
        return Err(Error::AssumptionOneViolated { lambda1 });
    }
    let a2 = x.iter().map(|&v| v < 1.0 / params.gamma).collect();
    let model = if prestige.is_some() { "prestige" } else { "base" };
    Ok(finish(net, params, model, x, y, SolveMethod::BestResponse, Some(residual), a1, a2))
}

/// `∂x_j/∂w_j` by central differences on the prestige closed form.
pub fn own_income_slope(net: &Network, params: &ModelParams, prestige: &PrestigeParams, j: AgentId) -> Result<f64> {
    net.check_agent(j)?;
    let w = net.income(j);
    let h = 1e-6 * w.max(1.0);
    let opts = SolveOptions { enforce_assumptions: false };
    let up = solve_closed_form_prestige_with(&net.with_income(j, w + h)?, params, prestige, &opts)?;
    let dn = solve_closed_form_prestige_with(&net.with_income(j, w - h)?, params, prestige, &opts)?;
    Ok((up.x[j] - dn.x[j]) / (2.0 * h))
}

/// Whether raising `P_θj` lowers `∂x_j/∂w_j`. Differentiating the prestige
/// closed form, this holds iff
/// `∂C_j/∂w_j > γ C_j (∂C̄_θ/∂w_j) / (α C̄_{−θ} + γ C̄_θ + P_{−θ})`,
/// which is the same as `∂x_j/∂w_j > 0`.
pub fn prestige_slope_premise(
    net: &Network,
    params: &ModelParams,
    prestige: &PrestigeParams,
    j: AgentId,
) -> Result<bool> {
    net.check_agent(j)?;
    let profile = generalized_centrality(net, params)?;
    let jac = crate::centrality::centrality_income_jacobian(net, params)?;
    let theta = net.identity(j);
    let den =
        params.alpha * profile.mean(theta.other()) + params.gamma * profile.mean(theta) + prestige.get(theta.other());
    let d_mean = jac.group_mean_derivative(net.identities(), theta, j);
    Ok(jac.get(j, j) > params.gamma * profile.c[j] * d_mean / den)
}
