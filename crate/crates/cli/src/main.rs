use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use statusnet_cli::config::{self, Generated};
use statusnet_cli::{cmd_experiment, cmd_generate, cmd_nbar, cmd_solve, CliError, GenerateArgs};
use statusnet_core::generate::RandomBlockSpec;
use statusnet_core::inequality::{CommunitiesSpec, Topology};
use statusnet_core::ModelParams;

/// Equilibria and comparative statics for status consumption on networks.
#[derive(Debug, Parser)]
#[command(name = "statusnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value by dotted path, e.g. `params.gamma=0.5`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the equilibrium and write the solution JSON.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file; stdout when neither this nor `output.path` is set.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a seeded random network.
    Generate(GenerateFlags),
    /// Run the configured experiment and write its reports.
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; defaults to `output.path`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print the minimum number of communities per identity.
    Nbar {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Communities,
    #[value(name = "random_block")]
    RandomBlock,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TopologyKind {
    Complete,
    Ring,
    Star,
}

#[derive(Debug, clap::Args)]
struct GenerateFlags {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Communities per identity, or the agent count for `random_block`.
    #[arg(long)]
    n: usize,
    /// Agents per community.
    #[arg(long, default_value_t = 3)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Community topologies, assigned in turn.
    #[arg(long, value_enum, default_values_t = [TopologyKind::Ring])]
    topology: Vec<TopologyKind>,
    /// Link weight before scaling.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    /// Community incomes, assigned in turn.
    #[arg(long, default_values_t = [1.0])]
    income: Vec<f64>,
    /// Probability of each cross-identity link.
    #[arg(long, default_value_t = 0.0)]
    cross_links: f64,
    #[arg(long, default_value_t = 0.3)]
    p_within: f64,
    #[arg(long, default_value_t = 0.0)]
    p_cross: f64,
    #[arg(long, default_value_t = 0.5)]
    frac_a: f64,
    /// Income range for `random_block`.
    #[arg(long, num_args = 2, default_values_t = [0.5, 2.0])]
    income_range: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl GenerateFlags {
    fn into_args(self) -> GenerateArgs {
        let kind = match self.kind {
            Kind::Communities => {
                let topology = self
                    .topology
                    .iter()
                    .map(|t| match t {
                        TopologyKind::Complete => Topology::Complete { weight: self.weight },
                        TopologyKind::Ring => Topology::Ring { weight: self.weight },
                        TopologyKind::Star => Topology::StarWithBacklink { weight: self.weight },
                    })
                    .collect();
                Generated::Communities(CommunitiesSpec {
                    n: self.n,
                    size: self.size,
                    topology,
                    incomes: self.income.clone(),
                    cross_links: self.cross_links,
                    cross_weight: 0.1,
                })
            }
            Kind::RandomBlock => Generated::RandomBlock(RandomBlockSpec {
                agents: self.n,
                frac_a: self.frac_a,
                p_within: self.p_within,
                p_cross: self.p_cross,
                weight: (0.1 * self.weight, self.weight),
                income: (self.income_range[0], self.income_range[1]),
            }),
        };
        GenerateArgs {
            kind,
            params: ModelParams { alpha: self.alpha, beta: self.beta, gamma: self.gamma },
            seed: self.seed,
            out: self.output,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, output } => {
            let loaded = config::load(&config.config, &config.overrides)?;
            cmd_solve(&loaded, output.as_deref())
        }
        Command::Generate(flags) => {
            let args = flags.into_args();
            let to_stdout = args.out.is_none();
            let g = cmd_generate(&args)?;
            if !to_stdout {
                println!(
                    "agents {} rho(H) {:.6} assumption 2 {}",
                    g.network.len(),
                    g.radius,
                    if g.assumption_2 { "holds" } else { "fails" }
                );
            }
            Ok(())
        }
        Command::Experiment { config, output, jobs } => {
            let loaded = config::load(&config.config, &config.overrides)?;
            let summary = cmd_experiment(&loaded, output.as_deref(), jobs)?;
            println!("{}: {} checks, 0 violations", summary.experiment, summary.checks);
            Ok(())
        }
        Command::Nbar { config } => {
            let loaded = config::load(&config.config, &config.overrides)?;
            let r = cmd_nbar(&loaded)?;
            println!("N_bar {} binding pair ({}, {})", r.n_bar, r.binding_pair.0, r.binding_pair.1);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STATUSNET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("E:USAGE: {}", e.to_string().trim_end());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
