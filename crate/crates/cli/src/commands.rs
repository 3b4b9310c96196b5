use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use statusnet_core::compstat::{
    homophily_swap_effect, n_bar, prop2_experiment, slutsky_decomposition, valid_swaps, NbarReport,
};
use statusnet_core::equilibrium::{solve_closed_form_prestige_with, solve_closed_form_with, SolveOptions};
use statusnet_core::inequality::{inequality_experiment, CommunityStructure, InequalityOptions};
use statusnet_core::net::mask_by_identity;
use statusnet_core::{solve_alt, Network};

use crate::config::{Experiment, Format, Generated, Loaded, Model, NetworkSource};
use crate::generate::{generate, GeneratedNetwork};
use crate::output::{
    alt_rows, solution_rows, to_csv, to_json, write_atomic, CompStatRecord, IncomePairRecord, InequalityRecord,
    SwapRecord,
};
use crate::CliError;

/// A loaded network and, for generated communities networks, the structure
/// it was built with.
struct Prepared {
    net: Network,
    structure: Option<CommunityStructure>,
}

impl Prepared {
    fn structure(&self) -> Result<CommunityStructure, CliError> {
        match &self.structure {
            Some(s) => Ok(s.clone()),
            None => Ok(CommunityStructure::infer(&self.net)?),
        }
    }
}

fn prepare(loaded: &Loaded) -> Result<Prepared, CliError> {
    match &loaded.config.network {
        NetworkSource::Path(p) => {
            let path = loaded.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(Prepared { net: Network::from_json(&text)?, structure: None })
        }
        NetworkSource::Inline(v) => Ok(Prepared { net: Network::from_json(&v.to_string())?, structure: None }),
        NetworkSource::Generated(kind) => {
            let g = generate(kind, &loaded.params()?, loaded.config.seed)?;
            Ok(Prepared { net: g.network, structure: g.structure })
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))
}

/// Runs `f` over `items` on the pool. Results come back in item order, and
/// the first failing item in that order decides the error.
fn fan_out<I, T, F>(pool: &rayon::ThreadPool, items: &[I], f: F) -> Result<Vec<T>, CliError>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T, CliError> + Sync,
{
    let results: Vec<Result<T, CliError>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Solves the configured model and returns the encoded solution.
fn solve_bytes(loaded: &Loaded, prepared: &Prepared) -> Result<Vec<u8>, CliError> {
    let cfg = &loaded.config;
    let format = cfg.output.as_ref().and_then(|o| o.format).unwrap_or(Format::Json);
    let opts = SolveOptions { enforce_assumptions: cfg.enforce_assumptions };
    let net = &prepared.net;
    match cfg.model {
        Model::Base | Model::Prestige => {
            let params = loaded.params()?;
            let sol = if cfg.model == Model::Base {
                solve_closed_form_with(net, &params, &opts)?
            } else {
                let prestige =
                    cfg.prestige.ok_or_else(|| CliError::Schema("prestige model needs \"prestige\"".into()))?;
                solve_closed_form_prestige_with(net, &params, &prestige, &opts)?
            };
            log::info!("solved {} agents, Y_A = {}", sol.x.len(), sol.y_a);
            match format {
                Format::Json => Ok(sol.to_json().into_bytes()),
                Format::Csv => to_csv(&solution_rows(&sol, net.identities())),
            }
        }
        Model::Alt => {
            let alt = cfg.alt.ok_or_else(|| CliError::Schema("alt model needs \"alt\"".into()))?;
            let sol = solve_alt(&mask_by_identity(net), &alt)?;
            log::info!("solved alt model for {} agents, Y_A = {}", sol.x.len(), sol.y_a);
            match format {
                Format::Json => Ok(sol.to_json().into_bytes()),
                Format::Csv => to_csv(&alt_rows(&sol, net.identities())),
            }
        }
    }
}

/// Solves and writes to `out`, the configured output path, or stdout.
pub fn cmd_solve(loaded: &Loaded, out: Option<&Path>) -> Result<(), CliError> {
    let prepared = prepare(loaded)?;
    let bytes = solve_bytes(loaded, &prepared)?;
    let configured = loaded.config.output.as_ref().and_then(|o| o.path.as_ref()).map(|p| loaded.resolve(p));
    match out.map(Path::to_path_buf).or(configured) {
        Some(path) => write_atomic(&path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub checks: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<usize>,
}

struct Run {
    files: Vec<(String, Vec<u8>)>,
    summary: ExperimentSummary,
}

fn table<T: Serialize>(name: &str, rows: &[T], format: Format) -> Result<(String, Vec<u8>), CliError> {
    Ok(match format {
        Format::Csv => (format!("{name}.csv"), to_csv(rows)?),
        Format::Json => (format!("{name}.json"), to_json(rows)),
    })
}

/// Runs the configured experiment and writes its tables and
/// `summary.json` into the output directory. Sign violations are reported
/// after the files are written, as [`CliError::SignViolations`].
pub fn cmd_experiment(loaded: &Loaded, out_dir: Option<&Path>, jobs: usize) -> Result<ExperimentSummary, CliError> {
    let cfg = &loaded.config;
    let experiment = cfg.experiment.as_ref().ok_or_else(|| CliError::Schema("missing \"experiment\"".into()))?;
    let configured = cfg.output.as_ref().and_then(|o| o.path.as_ref()).map(|p| loaded.resolve(p));
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or(configured)
        .ok_or_else(|| CliError::Schema("experiment needs an output directory".into()))?;
    if cfg.model != Model::Base && !matches!(experiment, Experiment::Solve) {
        return Err(CliError::Schema(format!("{} runs on the base model only", experiment.name())));
    }
    let format = cfg.output.as_ref().and_then(|o| o.format).unwrap_or(Format::Csv);
    let prepared = prepare(loaded)?;
    let pool = pool(jobs)?;
    log::info!(
        "running {} on {} agents with {} workers",
        experiment.name(),
        prepared.net.len(),
        pool.current_num_threads()
    );
    let run = run_experiment(loaded, &prepared, experiment, format, &pool)?;

    for (name, bytes) in &run.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    write_atomic(&dir.join("summary.json"), &to_json(&run.summary))?;
    if run.summary.violations > 0 {
        return Err(CliError::SignViolations { violations: run.summary.violations, checks: run.summary.checks });
    }
    Ok(run.summary)
}

fn run_experiment(
    loaded: &Loaded,
    prepared: &Prepared,
    experiment: &Experiment,
    format: Format,
    pool: &rayon::ThreadPool,
) -> Result<Run, CliError> {
    let net = &prepared.net;
    let summary = |checks, violations, n_bar| ExperimentSummary {
        experiment: experiment.name().into(),
        checks,
        violations,
        n_bar,
    };
    match experiment {
        Experiment::Solve => {
            let bytes = solve_bytes(loaded, prepared)?;
            let ext = match loaded.config.output.as_ref().and_then(|o| o.format).unwrap_or(Format::Json) {
                Format::Json => "json",
                Format::Csv => "csv",
            };
            Ok(Run { files: vec![(format!("solution.{ext}"), bytes)], summary: summary(0, 0, None) })
        }
        Experiment::Compstat { pairs } => {
            let params = loaded.params()?;
            let pairs: Vec<(usize, usize)> = match pairs {
                Some(p) => p.clone(),
                None => (0..net.len()).flat_map(|j| (0..net.len()).map(move |k| (j, k))).collect(),
            };
            let rows = fan_out(pool, &pairs, |&(j, k)| {
                let r = slutsky_decomposition(net, &params, j, k)?;
                Ok(CompStatRecord::new(&r, net.identity(j) == net.identity(k)))
            })?;
            let violations = rows.iter().filter(|r| !r.ok).count();
            Ok(Run { files: vec![table("compstat", &rows, format)?], summary: summary(rows.len(), violations, None) })
        }
        Experiment::Prop2 { communities, epsilon } => {
            let params = loaded.params()?;
            let structure = prepared.structure()?;
            let targets: Vec<usize> = communities.clone().unwrap_or_else(|| (0..structure.community_count()).collect());
            let reports = fan_out(pool, &targets, |&c| Ok(prop2_experiment(net, &structure, &params, c, *epsilon)?))?;
            let mut rows = Vec::new();
            let mut pairs = Vec::new();
            let (mut checks, mut violations) = (0, 0);
            for (r, c) in reports.iter().zip(&targets) {
                rows.extend(r.rows.iter().cloned());
                let id = format!("prop2_c{c}");
                pairs.extend(r.income_pairs.iter().map(|p| IncomePairRecord::new(&id, p)));
                checks += r.checks;
                violations += r.violations;
            }
            let n_bar = reports.first().map(|r| r.n_bar);
            let files = vec![table("prop2", &rows, format)?, table("prop2_income_pairs", &pairs, format)?];
            Ok(Run { files, summary: summary(checks, violations, n_bar) })
        }
        Experiment::Inequality { transfers, density_profile } => {
            let params = loaded.params()?;
            let structure = prepared.structure()?;
            let options = InequalityOptions { density_profile: density_profile.clone(), experiment_id: None };
            let reports =
                fan_out(pool, transfers, |t| Ok(inequality_experiment(net, &structure, &params, t, &options)?))?;
            let mut rows = Vec::new();
            let (mut checks, mut violations) = (0, 0);
            for r in &reports {
                rows.extend(r.rows.iter().map(InequalityRecord::from));
                // a "no effect" row that moved is as wrong as a flipped sign
                checks += r.checks + r.ties;
                violations += r.violations + r.tie_effects;
            }
            let n_bar = reports.first().map(|r| r.n_bar);
            Ok(Run { files: vec![table("inequality", &rows, format)?], summary: summary(checks, violations, n_bar) })
        }
        Experiment::HomophilySwap { swaps } => {
            let params = loaded.params()?;
            let swaps = swaps.clone().unwrap_or_else(|| valid_swaps(net));
            let rows = fan_out(pool, &swaps, |&(j, k, l)| {
                Ok(SwapRecord::from(&homophily_swap_effect(net, &params, j, k, l)?))
            })?;
            let violations = rows.iter().filter(|r| !(r.centrality_ok && r.consumption_ok)).count();
            Ok(Run {
                files: vec![table("homophily_swap", &rows, format)?],
                summary: summary(rows.len(), violations, None),
            })
        }
        Experiment::Nbar => {
            let report = n_bar(net, &prepared.structure()?, &loaded.params()?)?;
            let n = report.n_bar;
            Ok(Run { files: vec![("nbar.json".into(), to_json(&report))], summary: summary(0, 0, Some(n)) })
        }
    }
}

pub fn cmd_nbar(loaded: &Loaded) -> Result<NbarReport, CliError> {
    let prepared = prepare(loaded)?;
    Ok(n_bar(&prepared.net, &prepared.structure()?, &loaded.params()?)?)
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub kind: Generated,
    pub params: statusnet_core::ModelParams,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Generates a network and writes it to `out` or stdout.
pub fn cmd_generate(args: &GenerateArgs) -> Result<GeneratedNetwork, CliError> {
    let g = generate(&args.kind, &args.params, args.seed)?;
    let json = g.network.to_json();
    match &args.out {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(g)
}
