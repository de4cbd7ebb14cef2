use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inattention_cli::{
    cmd_experiment, cmd_simulate, cmd_solve, parse_p2, CliError, CliResult, ExperimentArgs, ExperimentReport,
    Overrides, ScenarioSource, SimulateArgs, SolveArgs,
};

#[derive(Parser)]
#[command(name = "inattention", version, about = "Sensor selection and deception in zero-sum stochastic games")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scenario {
    /// Builtin scenario: fig1, fig3, grid or random.
    #[arg(long)]
    scenario: Option<String>,
    /// JSON scenario document with a `scenario` field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reward gap of the fig3 scenario.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Discount override.
    #[arg(long)]
    gamma: Option<f64>,
}

impl Scenario {
    fn source(&self) -> ScenarioSource {
        ScenarioSource {
            scenario: self.scenario.clone(),
            config: self.config.clone(),
            overrides: Overrides { epsilon: self.epsilon, gamma: self.gamma },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium and write values and policies.
    Solve {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate episodes and estimate Player 1's discounted return.
    Simulate {
        #[command(flatten)]
        scenario: Scenario,
        /// equilibrium or deceptive
        #[arg(long, default_value = "equilibrium")]
        p2: String,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Reproduce the grid-world or random-game experiment.
    Experiment {
        /// grid or random
        #[arg(long)]
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Run only this Player 2 mode (grid); both by default.
        #[arg(long)]
        p2: Option<String>,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 100)]
        games: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Solve { scenario, tol, out } => {
            let r = cmd_solve(&SolveArgs { source: scenario.source(), tol, out })?;
            println!("V*(s0) = {:.6}", r.initial_value);
            println!("residual = {:.3e} after {} sweeps", r.residual, r.sweeps);
        }
        Command::Simulate { scenario, p2, runs, seed, tol, out } => {
            let p2 = parse_p2(&p2)?;
            let r = cmd_simulate(&SimulateArgs { source: scenario.source(), p2, runs, seed, tol, out })?;
            let e = r.estimate;
            println!("mean return = {:.6} ± {:.6} (sd {:.6}, n = {})", e.mean, e.half_width, e.sd, e.n);
        }
        Command::Experiment { name, config, epsilon, gamma, p2, runs, games, seed, tol, out } => {
            let args = ExperimentArgs {
                name: name.parse()?,
                config,
                overrides: Overrides { epsilon, gamma },
                p2: p2.as_deref().map(parse_p2).transpose()?,
                runs,
                games,
                seed,
                tol,
                out,
            };
            match cmd_experiment(&args)? {
                ExperimentReport::Grid { estimates, .. } => {
                    for (mode, e) in estimates {
                        println!("{mode:?}: mean return = {:.6} ± {:.6} (n = {})", e.mean, e.half_width, e.n);
                    }
                }
                ExperimentReport::Random { table, .. } => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
