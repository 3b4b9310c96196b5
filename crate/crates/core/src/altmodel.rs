//! Variant with a square-root conformity benefit `β (x_j − R_j)^{1/2}`, a
//! common income `w` and a linear consumption cost.
//!
//! With `k = 1/w − α > 0` each agent's best response is
//! `x_j = R_j + (β²/4)(γ Y_θj + k)^{−2}`, so equilibrium consumption is a
//! multiple of standard Bonacich centrality and `Y_A` solves
//!
//! `F(Y) = γ Y^{5/2} + k Y^{3/2} − k √r Y − γ √r = 0`, `r = C̄^bon_A / C̄^bon_B`.
//!
//! `F(0) < 0` and `F` is convex on `Y > 0`, so the positive root is unique.

use serde::{Deserialize, Serialize};

use crate::centrality::{group_mean, standard_bonacich};
use crate::equilibrium::reference_points;
use crate::error::{Error, Result};
use crate::net::{AgentId, Identity, MaskedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Common income.
    pub w: f64,
}

impl AltParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, w: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma, w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.gamma > 0.0) || !(self.w > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need beta, gamma, w > 0, got beta = {}, gamma = {}, w = {}",
                self.beta, self.gamma, self.w
            )));
        }
        if !(self.slack() > 0.0) {
            return Err(Error::InvalidParams(format!("need alpha < 1/w, got alpha = {}, w = {}", self.alpha, self.w)));
        }
        Ok(())
    }

    /// `k = 1/w − α`.
    pub fn slack(&self) -> f64 {
        1.0 / self.w - self.alpha
    }

    /// `(β²/4)(γ y − α + 1/w)^{−2}`: the gap `x_j − R_j` at status `y`.
    pub fn gap(&self, y: f64) -> f64 {
        let m = self.gamma * y + self.slack();
        0.25 * self.beta * self.beta / (m * m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltEquilibrium {
    pub model: String,
    pub x: Vec<f64>,
    #[serde(rename = "Y_A")]
    pub y_a: f64,
    #[serde(rename = "Y_B")]
    pub y_b: f64,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub c_bon: Vec<f64>,
    pub root_residual: f64,
    pub method: String,
    pub residual: f64,
}

impl AltEquilibrium {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }
}

/// `F(Y)`, grouped so that `F(1) = 0` exactly when `r = 1`.
pub fn status_residual(y: f64, r: f64, params: &AltParams) -> f64 {
    let (g, k, sr) = (params.gamma, params.slack(), r.sqrt());
    g * (y.powf(2.5) - sr) + k * (y.powf(1.5) - sr * y)
}

fn status_residual_derivative(y: f64, r: f64, params: &AltParams) -> f64 {
    let (g, k) = (params.gamma, params.slack());
    2.5 * g * y.powf(1.5) + 1.5 * k * y.sqrt() - k * r.sqrt()
}

const BISECTION_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-13;
const ROOT_MAX_ITER: usize = 200;

/// The unique positive root of `F` for ratio `r`: bracket by doubling,
/// bisect to `1e-8`, then polish with Newton steps kept inside the bracket.
pub fn solve_quintic_y(r: f64, params: &AltParams) -> Result<f64> {
    params.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParams(format!("centrality ratio must be positive, got {r}")));
    }
    if r == 1.0 {
        return Ok(1.0);
    }
    let f = |y: f64| status_residual(y, r, params);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::RootNotBracketed);
        }
    }
    if f(lo) >= 0.0 {
        return Err(Error::RootNotBracketed);
    }
    let mut iterations = 0;
    while hi - lo > BISECTION_TOL * hi.max(1.0) && iterations < ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut y = 0.5 * (lo + hi);
    while iterations < ROOT_MAX_ITER {
        let fy = f(y);
        if fy == 0.0 {
            break;
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let mut next = y - fy / status_residual_derivative(y, r, params);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - y).abs();
        iterations += 1;
        if step <= NEWTON_TOL * y.max(1.0) {
            // a step this small can still leave |F| well above rounding when F' is large
            if f(next).abs() < fy.abs() {
                y = next;
            }
            break;
        }
        y = next;
    }
    while iterations < ROOT_MAX_ITER {
        let fy = f(y);
        let next = y - fy / status_residual_derivative(y, r, params);
        if !(f(next).abs() < fy.abs()) {
            break;
        }
        y = next;
        iterations += 1;
    }
    Ok(y)
}

fn group_status_pair(y_a: f64) -> (f64, f64) {
    (y_a, 1.0 / y_a)
}

fn status_of(theta: Identity, y: (f64, f64)) -> f64 {
    match theta {
        Identity::A => y.0,
        Identity::B => y.1,
    }
}

/// Relative slack allowed when checking `x_j ≥ R_j`.
const FEASIBILITY_TOL: f64 = 1e-12;

fn check_feasible(params: &AltParams, identities: &[Identity], x: &[f64], r: &[f64], y: (f64, f64)) -> Result<()> {
    for (j, &theta) in identities.iter().enumerate() {
        if !(params.gamma * status_of(theta, y) + params.slack() > 0.0) {
            return Err(Error::ComparisonInfeasible { agent: j });
        }
        if x[j] < r[j] - FEASIBILITY_TOL * x[j].abs().max(1.0) {
            return Err(Error::ComparisonInfeasible { agent: j });
        }
    }
    Ok(())
}

pub fn solve_alt(g: &MaskedNetwork, params: &AltParams) -> Result<AltEquilibrium> {
    params.validate()?;
    let c_bon = standard_bonacich(g)?;
    let ids = g.identities();
    let ratio = group_mean(&c_bon, ids, Identity::A) / group_mean(&c_bon, ids, Identity::B);
    let y_a = solve_quintic_y(ratio, params)?;
    let root_residual = status_residual(y_a, ratio, params);
    let y = group_status_pair(y_a);
    let x: Vec<f64> = c_bon.iter().zip(ids).map(|(&c, &t)| params.gap(status_of(t, y)) * c).collect();
    let r = reference_points(g, &x);
    check_feasible(params, ids, &x, &r, y)?;
    let residual = best_response_residual(params, ids, &x, &r, y);
    Ok(AltEquilibrium {
        model: "alt".into(),
        x,
        y_a: y.0,
        y_b: y.1,
        r,
        c_bon,
        root_residual,
        method: "closed_form".into(),
        residual,
    })
}

fn best_response_residual(params: &AltParams, ids: &[Identity], x: &[f64], r: &[f64], y: (f64, f64)) -> f64 {
    (0..x.len()).map(|j| (x[j] - r[j] - params.gap(status_of(ids[j], y))).abs()).fold(0.0, f64::max)
}

fn status_from(x: &[f64], ids: &[Identity]) -> (f64, f64) {
    let (a, b) = (group_mean(x, ids, Identity::A), group_mean(x, ids, Identity::B));
    if a > 0.0 && b > 0.0 {
        (a / b, b / a)
    } else {
        (1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltOracleOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub start: Option<Vec<f64>>,
}

impl Default for AltOracleOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, damping: 0.5, start: None }
    }
}

/// Iterates `x_j ← R_j(x) + (β²/4)(γ Y_θj(x) − α + 1/w)^{−2}` with status
/// recomputed each sweep (seeded at 1 while a group mean is zero), damped
/// and with the same adaptive halving as the base-model oracle.
pub fn alt_best_response_oracle(
    g: &MaskedNetwork,
    params: &AltParams,
    opts: &AltOracleOptions,
) -> Result<AltEquilibrium> {
    params.validate()?;
    let n = g.len();
    let ids = g.identities();
    let mut x = match &opts.start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => return Err(Error::InvalidParams(format!("start has {} entries, network has {n}", s.len()))),
        None => vec![0.0; n],
    };
    let mut d = opts.damping;
    let d_min = opts.damping / 64.0;
    let mut checkpoint = f64::INFINITY;
    let mut result = None;
    for it in 0..=opts.max_iter {
        let y = status_from(&x, ids);
        let r = reference_points(g, &x);
        let br: Vec<f64> = (0..n).map(|j| r[j] + params.gap(status_of(ids[j], y))).collect();
        let residual = x.iter().zip(&br).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < opts.tol {
            result = Some((y, r, residual));
            break;
        }
        let norm = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() || !(norm <= 1e12) {
            return Err(Error::Diverged { iteration: it, norm });
        }
        if it == opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
        if it % 50 == 0 {
            if residual >= checkpoint {
                d = (0.5 * d).max(d_min);
            }
            checkpoint = residual;
        }
        // the first sweep from the zero profile takes the full step
        let step = if it == 0 && opts.start.is_none() { 1.0 } else { d };
        for (xi, bi) in x.iter_mut().zip(&br) {
            *xi += step * (bi - *xi);
        }
    }
    let (y, r, residual) = result.expect("loop exits through convergence or an error");
    check_feasible(params, ids, &x, &r, y)?;
    let c_bon = standard_bonacich(g)?;
    let ratio = group_mean(&c_bon, ids, Identity::A) / group_mean(&c_bon, ids, Identity::B);
    Ok(AltEquilibrium {
        model: "alt".into(),
        root_residual: status_residual(y.0, ratio, params),
        x,
        y_a: y.0,
        y_b: y.1,
        r,
        c_bon,
        method: "best_response".into(),
        residual,
    })
}

/// Agents whose consumption falls short of their reference point.
pub fn infeasible_agents(sol: &AltEquilibrium) -> Vec<AgentId> {
    sol.x.iter().zip(&sol.r).enumerate().filter(|(_, (x, r))| x < r).map(|(j, _)| j).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use Identity::{A, B};

    fn params() -> AltParams {
        AltParams { alpha: 0.5, beta: 1.0, gamma: 0.25, w: 1.0 }
    }

    #[test]
    fn params_require_slack() {
        assert!(AltParams::new(1.0, 1.0, 0.25, 1.0).is_err());
        assert!(AltParams::new(-0.5, 1.0, 0.25, 1.0).is_ok());
    }

    #[test]
    fn symmetric_root_is_one() {
        assert_eq!(solve_quintic_y(1.0, &params()).unwrap(), 1.0);
        assert_eq!(status_residual(1.0, 1.0, &params()), 0.0);
    }

    #[test]
    fn denser_a_group_has_higher_status() {
        let y = solve_quintic_y(4.0, &params()).unwrap();
        assert!(y > 1.0);
        assert!(status_residual(y, 4.0, &params()).abs() < 1e-12);
        // independent bracket check by plain bisection
        let (mut lo, mut hi) = (0.0_f64, 16.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if status_residual(mid, 4.0, &params()) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((y - lo).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_ratios_give_reciprocal_status() {
        let p = params();
        for e in -4..=4 {
            let r = 2f64.powi(e);
            let prod = solve_quintic_y(r, &p).unwrap() * solve_quintic_y(1.0 / r, &p).unwrap();
            assert!((prod - 1.0).abs() < 1e-10, "r = {r}");
        }
    }

    fn symmetric_net() -> MaskedNetwork {
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 1)] = 0.5;
        g[(1, 0)] = 0.5;
        g[(2, 3)] = 0.5;
        g[(3, 2)] = 0.5;
        MaskedNetwork::from_parts(g, vec![A, A, B, B]).unwrap()
    }

    #[test]
    fn symmetric_instance_closed_form() {
        let sol = solve_alt(&symmetric_net(), &params()).unwrap();
        assert_eq!(sol.y_a, 1.0);
        // (0.25 / 0.5625) · C^bon, C^bon = 2
        for &x in &sol.x {
            assert!((x - 0.25 / 0.5625 * 2.0).abs() < 1e-14);
        }
        assert!(infeasible_agents(&sol).is_empty());
        let oracle = alt_best_response_oracle(&symmetric_net(), &params(), &AltOracleOptions::default()).unwrap();
        for (a, b) in sol.x.iter().zip(&oracle.x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_network_is_exact_after_one_sweep() {
        let g = MaskedNetwork::from_parts(DMatrix::zeros(4, 4), vec![A, A, B, B]).unwrap();
        let p = params();
        let expected = p.gap(1.0);
        let opts = AltOracleOptions { max_iter: 1, ..Default::default() };
        let sol = alt_best_response_oracle(&g, &p, &opts).unwrap();
        assert!(sol.x.iter().all(|&x| x == expected));
    }

    #[test]
    fn asymmetric_instance_agrees_with_oracle() {
        let mut g = DMatrix::zeros(5, 5);
        g[(0, 1)] = 0.6;
        g[(1, 2)] = 0.6;
        g[(2, 0)] = 0.6;
        g[(3, 4)] = 0.2;
        let g = MaskedNetwork::from_parts(g, vec![A, A, A, B, B]).unwrap();
        let sol = solve_alt(&g, &params()).unwrap();
        assert!(sol.y_a > 1.0);
        assert!((sol.y_a * sol.y_b - 1.0).abs() < 1e-15);
        let oracle = alt_best_response_oracle(&g, &params(), &AltOracleOptions::default()).unwrap();
        for (a, b) in sol.x.iter().zip(&oracle.x) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_explosive_network() {
        let mut g = DMatrix::zeros(3, 3);
        g[(0, 1)] = 1.0;
        g[(1, 0)] = 1.0;
        let g = MaskedNetwork::from_parts(g, vec![A, A, B]).unwrap();
        assert!(matches!(solve_alt(&g, &params()), Err(Error::SpectralRadiusViolated { .. })));
    }
}
