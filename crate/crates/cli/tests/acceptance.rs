//! Acceptance suite. Each test prints one `criterion N PASS|FAIL` line and
//! fails when its criterion fails. The verdict line is written to the raw
//! stdout handle so it shows up even under the harness's output capture.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use statusnet_cli::config::Generated;
use statusnet_cli::generate::generate;
use statusnet_core::altmodel::{
    alt_best_response_oracle, infeasible_agents, status_residual, AltOracleOptions, AltParams,
};
use statusnet_core::centrality::{centrality_income_jacobian, generalized_centrality};
use statusnet_core::compstat::{
    homophily_swap_effect, n_bar, prop2_experiment, slutsky_decomposition, valid_swaps, ExpectedSign,
};
use statusnet_core::equilibrium::{
    best_response_oracle, own_income_slope, prestige_slope_premise, solve_closed_form, solve_closed_form_prestige,
    OracleOptions, PrestigeParams,
};
use statusnet_core::generate::{random_block, random_params, rescale_to_radius, rng, RandomBlockSpec};
use statusnet_core::inequality::{
    apply_transfer, check_centrality_density, effective_group_totals, group_total_consumption, inequality_experiment,
    solver_group_totals, total_consumption_derivative, total_consumption_from_phi, CommunitiesSpec, CommunityStructure,
    DensityPoint, InequalityOptions, Topology, TransferSpec,
};
use statusnet_core::net::{mask_by_identity, HomophilyDelta, Identity, MaskedNetwork};
use statusnet_core::{solve_alt, solve_quintic_y, spectral, ModelParams, Network};

use Identity::{A, B};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2} {}: {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn note(n: u32, text: &str) {
    let line = format!("criterion {n:>2} note: {text}\n");
    std::io::stdout().write_all(line.as_bytes()).unwrap();
}

fn unit() -> ModelParams {
    ModelParams { alpha: 2.0, beta: 1.0, gamma: 1.0 }
}

fn four_agent() -> Network {
    let mut g = DMatrix::zeros(4, 4);
    g[(0, 1)] = 0.5;
    g[(1, 0)] = 0.5;
    Network::new(vec![1.0; 4], vec![A, A, B, B], g).unwrap()
}

/// Random two-group network scaled to `ρ(H) ≤ 0.9`, with random parameters.
fn random_instance(r: &mut ChaCha8Rng, max_agents: usize) -> (Network, ModelParams) {
    let p = random_params(r);
    let spec = RandomBlockSpec {
        agents: r.random_range(4..=max_agents),
        frac_a: r.random_range(0.3..=0.7),
        p_within: r.random_range(0.05..=0.5),
        p_cross: r.random_range(0.0..=0.3),
        weight: (0.1, 1.0),
        income: (0.5, 3.0),
    };
    let net = random_block(&spec, r.random()).unwrap();
    (rescale_to_radius(&net, &p, 0.9).unwrap().0, p)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_fixture_exactness() {
    let net = four_agent();
    let sol = solve_closed_form(&net, &unit()).unwrap();
    let expected = [0.6, 0.6, 6.0 / 11.0, 6.0 / 11.0];
    let err = sup_diff(&sol.x, &expected).max((sol.y_a - 1.1).abs());
    let mut fastest = Duration::MAX;
    for _ in 0..200 {
        let t = Instant::now();
        std::hint::black_box(solve_closed_form(std::hint::black_box(&net), &unit()).unwrap());
        fastest = fastest.min(t.elapsed());
    }
    let pass = err <= 1e-12 && fastest < Duration::from_millis(1);
    verdict(1, "fixture exactness", pass, &format!("max error {err:.1e}, solve time {fastest:?}"));
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut accepted, mut rejected, mut worst, mut failures) = (0, 0, 0.0f64, Vec::new());
    while accepted < 500 {
        let (net, p) = random_instance(&mut r, 60);
        let closed = match solve_closed_form(&net, &p) {
            Ok(s) => s,
            Err(e) if e.is_assumption() => {
                rejected += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        accepted += 1;
        let top = closed.x.iter().cloned().fold(0.0, f64::max);
        for _ in 0..5 {
            let start: Vec<f64> = (0..net.len()).map(|_| r.random_range(0.0..=2.0 * top)).collect();
            let opts = OracleOptions { tol: 1e-12, start: Some(start), ..Default::default() };
            match best_response_oracle(&net, &p, None, &opts) {
                Ok(o) => worst = worst.max(sup_diff(&o.x, &closed.x)),
                Err(e) => failures.push(e.to_string()),
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && worst <= 1e-8 && elapsed < Duration::from_secs(60);
    verdict(
        2,
        "oracle equivalence",
        pass,
        &format!(
            "{accepted} instances x 5 starts ({rejected} rejected by assumptions), max |dx| {worst:.1e}, {} oracle failures, {elapsed:.1?}",
            failures.len()
        ),
    );
}

#[test]
fn criterion_03_status_identity_and_zero_prestige() {
    let mut r = rng(3);
    let (mut solves, mut worst, mut mismatches) = (0, 0.0f64, 0);
    let mut nets = vec![(four_agent(), unit())];
    while nets.len() < 300 {
        nets.push(random_instance(&mut r, 40));
    }
    let zero = PrestigeParams { p_a: 0.0, p_b: 0.0 };
    for (net, p) in &nets {
        let Ok(base) = solve_closed_form(net, p) else { continue };
        solves += 1;
        worst = worst.max((base.y_a * base.y_b - 1.0).abs());
        let pr = solve_closed_form_prestige(net, p, &zero).unwrap();
        if pr.x != base.x || pr.y_a != base.y_a || pr.y_b != base.y_b || pr.r != base.r {
            mismatches += 1;
        }
    }
    let pass = worst <= 1e-12 && mismatches == 0;
    verdict(
        3,
        "status identity and zero-prestige reduction",
        pass,
        &format!("{solves} solves, max |Y_A Y_B - 1| {worst:.1e}, {mismatches} zero-prestige mismatches"),
    );
}

#[test]
fn criterion_04_jacobian() {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (net, p) = random_instance(&mut r, 30);
        let jac = centrality_income_jacobian(&net, &p).unwrap();
        for k in 0..net.len() {
            let w = net.income(k);
            let h = 1e-6 * w.max(1.0);
            let up = generalized_centrality(&net.with_income(k, w + h).unwrap(), &p).unwrap();
            let dn = generalized_centrality(&net.with_income(k, w - h).unwrap(), &p).unwrap();
            let fd: Vec<f64> = up.c.iter().zip(&dn.c).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let an: Vec<f64> = (0..net.len()).map(|j| jac.get(j, k)).collect();
            let scale = an.iter().map(|v| v.abs()).fold(0.0, f64::max);
            worst = worst.max(sup_diff(&fd, &an) / scale);
        }
    }
    verdict(
        4,
        "centrality income jacobian",
        worst <= 1e-5,
        &format!("100 instances, max column relative error {worst:.1e}"),
    );
}

const TOPOLOGIES: [fn(f64) -> Topology; 3] = [
    |w| Topology::Complete { weight: w },
    |w| Topology::Ring { weight: w },
    |w| Topology::StarWithBacklink { weight: w },
];

/// Random communities network with repeated link patterns and varied
/// incomes, so that identical communities with different incomes exist.
fn random_communities(r: &mut ChaCha8Rng) -> (Network, CommunityStructure, ModelParams) {
    loop {
        let gamma = r.random_range(0.2..=0.8);
        let p = ModelParams { alpha: gamma * r.random_range(2.0..=4.0), beta: r.random_range(0.3..=2.0), gamma };
        let topology =
            (0..r.random_range(1..=2)).map(|_| TOPOLOGIES[r.random_range(0..3)](r.random_range(0.1..=0.4))).collect();
        let spec = CommunitiesSpec {
            n: r.random_range(3..=7),
            size: r.random_range(2..=4),
            topology,
            incomes: (0..3).map(|_| r.random_range(0.5..=3.0)).collect(),
            cross_links: r.random_range(0.0..=0.2),
            cross_weight: 0.1,
        };
        let g = generate(&Generated::Communities(spec), &p, r.random()).unwrap();
        if g.assumption_2 {
            return (g.network, g.structure.unwrap(), p);
        }
    }
}

#[test]
fn criterion_05_income_shock_signs() {
    let mut r = rng(5);
    let (mut accepted, mut below_nbar) = (0, 0);
    // checks and violations per claim: same identity elsewhere down, shocked
    // community up, other identity up, impact rising with income
    let mut checks = [0usize; 4];
    let mut violations = [0usize; 4];
    while accepted < 50 {
        let (net, s, p) = random_communities(&mut r);
        let nb = n_bar(&net, &s, &p).unwrap();
        if s.n_per_identity() < nb.n_bar + 1 {
            below_nbar += 1;
            continue;
        }
        accepted += 1;
        let shocked = [2 * r.random_range(0..s.n_per_identity()), 2 * r.random_range(0..s.n_per_identity()) + 1];
        for c in shocked {
            let rep = prop2_experiment(&net, &s, &p, c, None).unwrap();
            for row in &rep.rows {
                let claim = if row.identity != s.identity(c) {
                    2
                } else if row.community == c {
                    1
                } else {
                    0
                };
                checks[claim] += 1;
                violations[claim] += usize::from(!row.sign_ok);
            }
            checks[3] += rep.income_pairs.len();
            violations[3] += rep.income_pairs.iter().filter(|q| !q.ok).count();
        }
    }
    let pass = violations.iter().all(|&v| v == 0) && checks.iter().all(|&c| c > 0);
    verdict(
        5,
        "income shock sign suite",
        pass,
        &format!("{accepted} networks ({below_nbar} skipped with N < N_bar + 1), checks {checks:?}, violations {violations:?}"),
    );
}

#[test]
fn criterion_06_decomposition() {
    let mut r = rng(6);
    let (mut pairs, mut cross, mut worst, mut nonpositive) = (0, 0, 0.0f64, 0);
    for _ in 0..100 {
        let (net, p) = random_instance(&mut r, 30);
        if solve_closed_form(&net, &p).is_err() {
            continue;
        }
        for _ in 0..6 {
            let (j, k) = (r.random_range(0..net.len()), r.random_range(0..net.len()));
            let rep = slutsky_decomposition(&net, &p, j, k).unwrap();
            pairs += 1;
            worst = worst.max((rep.total - rep.analytic_total).abs() / rep.analytic_total.abs());
            if net.identity(j) != net.identity(k) {
                cross += 1;
                if !(rep.total > 0.0 && rep.analytic_total > 0.0) {
                    nonpositive += 1;
                }
            }
        }
    }
    let pass = worst <= 1e-5 && nonpositive == 0 && cross > 0;
    verdict(
        6,
        "two-channel decomposition",
        pass,
        &format!(
            "{pairs} pairs, max relative gap {worst:.1e}, {cross} cross-identity pairs with {nonpositive} non-positive"
        ),
    );
}

/// Communities network with donor community 0 and recipient community 2
/// (both A) using the given topologies. Other A communities are complete
/// and B communities are rings.
fn transfer_fixture(donor: usize, recipient: usize, n: usize) -> (Network, CommunityStructure) {
    let mut topology = Vec::new();
    let mut incomes = Vec::new();
    for c in 0..2 * n {
        let t = match c {
            0 => TOPOLOGIES[donor](0.3),
            2 => TOPOLOGIES[recipient](0.3),
            c if c % 2 == 0 => Topology::Complete { weight: 0.3 },
            _ => Topology::Ring { weight: 0.3 },
        };
        topology.push(t);
        incomes.push(match c {
            0 => 2.0,
            2 => 1.0,
            _ => 1.5,
        });
    }
    let spec = CommunitiesSpec { n, size: 3, topology, incomes, cross_links: 0.0, cross_weight: 0.1 };
    let g = generate(&Generated::Communities(spec), &transfer_params(), 0).unwrap();
    (g.network, g.structure.unwrap())
}

fn transfer_params() -> ModelParams {
    ModelParams { alpha: 2.0, beta: 1.0, gamma: 0.5 }
}

#[test]
fn criterion_07_inequality_transfers() {
    let p = transfer_params();
    let names = ["complete", "ring", "star"];
    let (mut strict_cells, mut strict_ok, mut tie_cells, mut tie_ok) = (0, 0, 0, 0);
    let mut worst_tie = 0.0f64;
    let mut failures = Vec::new();
    // failing cells where other communities moved against the change in
    // summed walk-sum centrality of the group
    let mut explained = 0;
    for d in 0..3 {
        for rcp in 0..3 {
            let mut n = 4;
            let (net, s) = loop {
                let (net, s) = transfer_fixture(d, rcp, n);
                let nb = n_bar(&net, &s, &p).unwrap().n_bar;
                if n > nb {
                    break (net, s);
                }
                n = nb + 1;
            };
            for eps in [0.05, 0.15, 0.3] {
                let spec = TransferSpec { donor: 0, recipient: 2, epsilon: eps };
                let rep = inequality_experiment(&net, &s, &p, &spec, &InequalityOptions::default()).unwrap();
                let tie = rep.ties > 0;
                let ok = rep.violations == 0 && rep.tie_effects == 0;
                if tie {
                    tie_cells += 1;
                    tie_ok += usize::from(ok);
                    for row in rep.rows.iter().filter(|r| r.sign.expected_sign == ExpectedSign::Zero) {
                        worst_tie = worst_tie.max(row.sign.delta.abs());
                    }
                } else {
                    strict_cells += 1;
                    strict_ok += usize::from(ok);
                }
                if !ok {
                    failures.push(format!("{}->{} eps {eps}", names[d], names[rcp]));
                    let after = net.with_incomes(s.agent_incomes(&apply_transfer(&s, &spec).unwrap())).unwrap();
                    let d_phi = effective_group_totals(&after, &p).unwrap().phi_a
                        - effective_group_totals(&net, &p).unwrap().phi_a;
                    let follows = rep
                        .rows
                        .iter()
                        .filter(|r| r.sign.community != 0 && r.sign.community != 2)
                        .all(|r| r.sign.delta * d_phi < 0.0);
                    explained += usize::from(follows);
                }
            }
        }
    }
    note(7, &format!("failing cells: {failures:?}"));
    note(
        7,
        &format!(
            "in {explained} of {} failing cells the others moved opposite to the change in the group's summed walk-sum centrality",
            failures.len()
        ),
    );
    let pass = failures.is_empty();
    verdict(
        7,
        "inequality transfer signs",
        pass,
        &format!(
            "strict cells {strict_ok}/{strict_cells} ok, density-tie cells with no effect {tie_ok}/{tie_cells}, largest tie |dx| {worst_tie:.2e}"
        ),
    );
}

#[test]
fn criterion_08_density_identity_and_group_totals() {
    let mut fixtures = Vec::new();
    let mut r = rng(8);
    for _ in 0..20 {
        let (net, s, p) = random_communities(&mut r);
        fixtures.push((net, s, p));
    }
    for d in 0..3 {
        for rcp in 0..3 {
            let (net, s) = transfer_fixture(d, rcp, 4);
            fixtures.push((net, s, transfer_params()));
        }
    }
    let (mut identity_gap, mut totals_gap, mut effective_gap, mut slope_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut nonpositive_slopes = 0;
    for (net, s, p) in &fixtures {
        identity_gap = identity_gap.max(check_centrality_density(net, s, p).unwrap().max_discrepancy());
        let (xa, xb) = solver_group_totals(net, p).unwrap();
        let lemma = group_total_consumption(net, s, p).unwrap();
        totals_gap = totals_gap.max((lemma.x_a - xa).abs()).max((lemma.x_b - xb).abs());
        let eff = effective_group_totals(net, p).unwrap();
        effective_gap = effective_gap.max((eff.x_a - xa).abs()).max((eff.x_b - xb).abs());

        let agents = net.len();
        for (phi, other) in [(eff.phi_a, eff.phi_b), (eff.phi_b, eff.phi_a)] {
            let mean_other = 2.0 * other / agents as f64;
            let h = 1e-6 * phi;
            let fd = (total_consumption_from_phi(phi + h, mean_other, agents, p)
                - total_consumption_from_phi(phi - h, mean_other, agents, p))
                / (2.0 * h);
            let an = total_consumption_derivative(phi, mean_other, agents, p);
            slope_gap = slope_gap.max((fd - an).abs() / an.abs());
            nonpositive_slopes += usize::from(!(an > 0.0 && fd > 0.0));
        }
    }
    note(
        8,
        &format!(
            "supplementary: group totals from summed generalized centrality match the solver to {effective_gap:.1e}"
        ),
    );
    let pass = identity_gap <= 1e-9 && totals_gap <= 1e-9 && slope_gap <= 1e-5 && nonpositive_slopes == 0;
    verdict(
        8,
        "density identity and group totals",
        pass,
        &format!(
            "{} fixtures, density identity gap {identity_gap:.2e}, group total gap {totals_gap:.2e}, dX/dphi relative gap {slope_gap:.1e} with {nonpositive_slopes} non-positive",
            fixtures.len()
        ),
    );
}

#[test]
fn criterion_09_prestige_statics() {
    let mut r = rng(9);
    let (mut accepted, mut rejected, mut steps, mut premise_skips, mut slope_checks) = (0, 0, 0, 0, 0);
    let mut violations = [0usize; 3];
    'instances: while accepted < 50 {
        let (net, p) = random_instance(&mut r, 25);
        let theta = if r.random::<bool>() { A } else { B };
        let base = PrestigeParams { p_a: r.random_range(0.05..=0.5), p_b: r.random_range(0.05..=0.5) };
        let levels: Vec<PrestigeParams> =
            (0..=5).map(|i| base.with(theta, base.get(theta) + 0.05 * i as f64)).collect();
        let mut sols = Vec::new();
        for pr in &levels {
            match solve_closed_form_prestige(&net, &p, pr) {
                Ok(s) => sols.push(s),
                Err(e) if e.is_assumption() => {
                    rejected += 1;
                    continue 'instances;
                }
                Err(e) => panic!("{e}"),
            }
        }
        accepted += 1;
        let group = net.members(theta);
        let others = net.members(theta.other());
        for i in 1..levels.len() {
            steps += 1;
            let (before, after) = (&sols[i - 1], &sols[i]);
            violations[0] += group.iter().filter(|&&j| after.x[j] >= before.x[j]).count();
            violations[1] += others.iter().filter(|&&j| after.x[j] <= before.x[j]).count();
            for &j in &group {
                if !prestige_slope_premise(&net, &p, &levels[i - 1], j).unwrap() {
                    premise_skips += 1;
                    continue;
                }
                slope_checks += 1;
                let s0 = own_income_slope(&net, &p, &levels[i - 1], j).unwrap();
                let s1 = own_income_slope(&net, &p, &levels[i], j).unwrap();
                violations[2] += usize::from(s1 >= s0);
            }
        }
    }
    let pass = violations.iter().all(|&v| v == 0);
    verdict(
        9,
        "prestige comparative statics",
        pass,
        &format!(
            "{accepted} instances ({rejected} rejected), {steps} increments, {slope_checks} slope checks ({premise_skips} without the slope premise), violations [own group down, other group up, slope down] = {violations:?}"
        ),
    );
}

/// Masked random network scaled so that `ρ(Ĝ) = 0.8`.
fn alt_network(seed: u64) -> MaskedNetwork {
    let spec = RandomBlockSpec {
        agents: 14,
        frac_a: 0.5,
        p_within: 0.4,
        p_cross: 0.2,
        weight: (0.1, 1.0),
        income: (1.0, 1.0),
    };
    let net = random_block(&spec, seed).unwrap();
    let masked = mask_by_identity(&net);
    let rho = spectral::radius_default(masked.matrix()).unwrap().lambda1;
    let scaled = net.with_links(net.links() * (0.8 / rho)).unwrap();
    mask_by_identity(&scaled)
}

#[test]
fn criterion_10_alt_model() {
    let params = [
        AltParams { alpha: 0.5, beta: 1.0, gamma: 0.25, w: 1.0 },
        AltParams { alpha: -0.5, beta: 2.0, gamma: 1.0, w: 0.5 },
        AltParams { alpha: 0.1, beta: 0.5, gamma: 2.0, w: 2.0 },
    ];
    let (mut exact_one, mut worst_product, mut worst_residual, mut worst_oracle, mut infeasible) =
        (true, 0.0f64, 0.0f64, 0.0f64, 0);
    for p in &params {
        exact_one &= solve_quintic_y(1.0, p).unwrap() == 1.0;
        for k in -8..=8 {
            let ratio = 2f64.powf(k as f64 / 2.0);
            let y = solve_quintic_y(ratio, p).unwrap();
            let y_inv = solve_quintic_y(1.0 / ratio, p).unwrap();
            worst_product = worst_product.max((y * y_inv - 1.0).abs());
            worst_residual = worst_residual.max(status_residual(y, ratio, p).abs());
        }
        for seed in 0..4 {
            let g = alt_network(seed);
            let closed = solve_alt(&g, p).unwrap();
            worst_residual = worst_residual.max(closed.root_residual.abs());
            let oracle =
                alt_best_response_oracle(&g, p, &AltOracleOptions { tol: 1e-12, ..Default::default() }).unwrap();
            worst_oracle = worst_oracle.max(sup_diff(&closed.x, &oracle.x));
            infeasible += infeasible_agents(&closed).len() + infeasible_agents(&oracle).len();
        }
    }
    let pass = exact_one && worst_product <= 1e-10 && worst_residual < 1e-12 && worst_oracle <= 1e-8 && infeasible == 0;
    verdict(
        10,
        "alt model",
        pass,
        &format!(
            "Y(1) == 1: {exact_one}, max |Y(r)Y(1/r) - 1| {worst_product:.1e}, max root residual {worst_residual:.1e}, oracle gap {worst_oracle:.1e}, {infeasible} agents below reference"
        ),
    );
}

/// Six A agents and six B agents with within-group rings, chords and a few
/// cross links. Out-weights stay below 1, so every swap keeps `ρ(H) < 1`.
fn swap_fixture() -> Network {
    let mut g = DMatrix::zeros(12, 12);
    for base in [0, 6] {
        for i in 0..6 {
            g[(base + i, base + (i + 1) % 6)] = 0.2;
        }
        g[(base, base + 3)] = 0.2;
        g[(base + 2, base + 5)] = 0.2;
    }
    for (j, k) in [(1, 7), (4, 10), (8, 2), (11, 5), (3, 9)] {
        g[(j, k)] = 0.2;
    }
    let incomes = (0..12).map(|j| 0.5 + 0.25 * (j % 5) as f64).collect();
    let ids = (0..12).map(|j| if j < 6 { A } else { B }).collect();
    Network::new(incomes, ids, g).unwrap()
}

#[test]
fn criterion_11_homophily_swaps() {
    let net = swap_fixture();
    let p = unit();
    let swaps = valid_swaps(&net);
    let mut counts = [0usize; 3];
    let (mut mismatches, mut consumption_mismatches) = (0, 0);
    for &(j, k, l) in &swaps {
        let rep = homophily_swap_effect(&net, &p, j, k, l).unwrap();
        let own_ok = match rep.delta {
            HomophilyDelta::Raising => {
                counts[0] += 1;
                rep.dc[j] > 0.0
            }
            HomophilyDelta::Lowering => {
                counts[1] += 1;
                rep.dc[j] < 0.0
            }
            HomophilyDelta::Neutral => {
                counts[2] += 1;
                true
            }
        };
        mismatches += usize::from(!(own_ok && rep.centrality_ok));
        consumption_mismatches += usize::from(!rep.consumption_ok);
    }
    note(
        11,
        &format!("other-group consumption moved against the group-centrality change in {consumption_mismatches} swaps"),
    );
    verdict(
        11,
        "homophily swap classification",
        mismatches == 0 && swaps.len() == counts.iter().sum::<usize>(),
        &format!(
            "{} swaps (raising {}, lowering {}, neutral {}), {mismatches} mismatches",
            swaps.len(),
            counts[0],
            counts[1],
            counts[2]
        ),
    );
}

fn statusnet(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_statusnet")).args(args).current_dir(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_cli_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut problems = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            problems.push(what.to_string());
        }
    };

    // determinism
    let gen = [
        "generate",
        "--kind",
        "communities",
        "--n",
        "20",
        "--size",
        "3",
        "--seed",
        "7",
        "--weight",
        "0.2",
        "--topology",
        "ring",
        "--topology",
        "star",
        "--income",
        "1",
        "--income",
        "2",
        "--income",
        "1.5",
        "--cross-links",
        "0.05",
    ];
    let (c1, _, _) = statusnet(&[&gen[..], &["-o", "g1.json"]].concat(), d);
    let (c2, _, _) = statusnet(&[&gen[..], &["-o", "g2.json"]].concat(), d);
    let g1 = std::fs::read(d.join("g1.json")).unwrap_or_default();
    expect("generate exit codes", c1 == 0 && c2 == 0);
    expect("generate bytes", !g1.is_empty() && g1 == std::fs::read(d.join("g2.json")).unwrap_or_default());
    let (_, _, _) = statusnet(&["generate", "--kind", "random_block", "--n", "30", "--seed", "3", "-o", "rb1.json"], d);
    let (_, _, _) = statusnet(&["generate", "--kind", "random_block", "--n", "30", "--seed", "3", "-o", "rb2.json"], d);
    let (_, _, _) = statusnet(&["generate", "--kind", "random_block", "--n", "30", "--seed", "4", "-o", "rb3.json"], d);
    let rb1 = std::fs::read(d.join("rb1.json")).unwrap_or_default();
    expect("random_block bytes", !rb1.is_empty() && rb1 == std::fs::read(d.join("rb2.json")).unwrap_or_default());
    expect("random_block seeds differ", rb1 != std::fs::read(d.join("rb3.json")).unwrap_or_default());

    std::fs::write(d.join("solve.json"), r#"{"network": "g1.json", "params": {"alpha": 2, "beta": 1, "gamma": 0.5}}"#)
        .unwrap();
    let (s1, _, _) = statusnet(&["solve", "-c", "solve.json", "-o", "s1.json"], d);
    let (s2, _, _) = statusnet(&["solve", "-c", "solve.json", "-o", "s2.json"], d);
    let sol = std::fs::read(d.join("s1.json")).unwrap_or_default();
    expect("solve exit codes", s1 == 0 && s2 == 0);
    expect("solve bytes", !sol.is_empty() && sol == std::fs::read(d.join("s2.json")).unwrap_or_default());

    let experiment = r#"{"network": {"communities": {"n": 8, "size": 3, "topology": [{"kind": "complete", "weight": 0.3}], "incomes": [1.0, 2.0, 1.5]}},
        "params": {"alpha": 2, "beta": 1, "gamma": 0.5}, "seed": 11, "experiment": {"kind": "prop2"}}"#;
    std::fs::write(d.join("prop2.json"), experiment).unwrap();
    let (e1, _, err1) = statusnet(&["experiment", "-c", "prop2.json", "-o", "run1", "--jobs", "1"], d);
    let (e2, _, _) = statusnet(&["experiment", "-c", "prop2.json", "-o", "run2", "--jobs", "4"], d);
    expect(&format!("experiment exit codes {e1} {e2} {err1}"), e1 == 0 && e2 == 0);
    let run1 = dir_bytes(&d.join("run1"));
    expect("experiment files", run1.len() == 3);
    expect("experiment bytes", run1 == dir_bytes(&d.join("run2")));

    // malformed input
    std::fs::write(d.join("broken.json"), r#"{"network": "g1.json", "params": {"alpha": 2,"#).unwrap();
    let (code, _, err) = statusnet(&["solve", "-c", "broken.json"], d);
    expect("malformed config exits 1", code == 1 && err.starts_with("E:"));
    std::fs::write(d.join("dup.json"), r#"{"agents": [{"id": 0, "income": 1, "identity": "A"}, {"id": 1, "income": 1, "identity": "B"}], "links": [[0, 1, 0.5], [0, 1, 0.5]]}"#).unwrap();
    std::fs::write(d.join("dupcfg.json"), r#"{"network": "dup.json", "params": {"alpha": 2, "beta": 1, "gamma": 1}}"#)
        .unwrap();
    let (code, _, err) = statusnet(&["solve", "-c", "dupcfg.json"], d);
    expect("duplicate link exits 1", code == 1 && err.starts_with("E:"));

    // assumption violations, with no partial output
    let explosive = r#"{"network": {"agents": [{"id": 0, "income": 1, "identity": "A"}, {"id": 1, "income": 1, "identity": "A"},
        {"id": 2, "income": 1, "identity": "B"}, {"id": 3, "income": 1, "identity": "B"}], "links": [[0, 1, 2.4], [1, 0, 2.4]]},
        "params": {"alpha": 2, "beta": 1, "gamma": 1}}"#;
    std::fs::write(d.join("a1.json"), explosive).unwrap();
    let (code, _, err) = statusnet(&["solve", "-c", "a1.json", "-o", "a1_out.json"], d);
    expect("assumption 1 exits 2", code == 2 && err.starts_with("E:ASSUMPTION1:"));
    expect("no partial output", !d.join("a1_out.json").exists());
    // rich agents and a small dissonance weight push x past 1/gamma
    let rich = explosive.replace("\"income\": 1", "\"income\": 100").replace("2.4", "0.5");
    std::fs::write(d.join("a2.json"), rich).unwrap();
    let (code, _, err) = statusnet(&["solve", "-c", "a2.json", "--set", "params.beta=0.01"], d);
    expect(&format!("assumption 2 exits 2 ({code}, {err})"), code == 2 && err.starts_with("E:ASSUMPTION2:"));

    // sign violation: a density table predicting the opposite of what happens
    let (net, s) = transfer_fixture(1, 0, 4);
    let spec = TransferSpec { donor: 0, recipient: 2, epsilon: 0.2 };
    let rep = inequality_experiment(&net, &s, &transfer_params(), &spec, &InequalityOptions::default()).unwrap();
    let moved_up =
        rep.rows.iter().filter(|r| r.sign.community != 0 && r.sign.community != 2).all(|r| r.sign.delta > 0.0);
    let (low, high) = (DensityPoint { income: 1.0, density: 1.0 }, DensityPoint { income: 2.0, density: 4.0 });
    // others rise iff the recipient (income 1) is the less dense; invert that
    let table = if moved_up {
        vec![DensityPoint { income: 1.0, density: 4.0 }, DensityPoint { income: 2.0, density: 1.0 }]
    } else {
        vec![low, high]
    };
    std::fs::write(d.join("net_ineq.json"), net.to_json()).unwrap();
    let cfg = serde_json::json!({
        "network": "net_ineq.json",
        "params": {"alpha": 2.0, "beta": 1.0, "gamma": 0.5},
        "experiment": {"kind": "inequality", "transfers": [spec], "density_profile": table},
    });
    std::fs::write(d.join("ineq.json"), cfg.to_string()).unwrap();
    let (code, _, err) = statusnet(&["experiment", "-c", "ineq.json", "-o", "ineq_out"], d);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("ineq_out/summary.json")).unwrap_or_default()).unwrap_or_default();
    expect(
        &format!("sign violation exits 3 ({code}, {err})"),
        code == 3 && err.starts_with("E:SIGN:") && summary["violations"].as_u64().unwrap_or(0) > 0,
    );

    let (code, stdout, _) = statusnet(&["nbar", "-c", "prop2.json"], d);
    expect("nbar prints", code == 0 && stdout.starts_with("N_bar "));

    verdict(12, "CLI determinism and exit codes", problems.is_empty(), &format!("problems: {problems:?}"));
}
