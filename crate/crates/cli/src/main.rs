use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use poolgame_core::experiments::{self, Artifacts, Engine, ExperimentConfig, Status};
use poolgame_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "poolgame", version, about = "Mining-pool selection game: replicator dynamics, agent simulation and equilibrium analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the replicator dynamics and/or run the agent simulation.
    Evolve(Args),
    /// Two-pool phase portrait: vector field, trajectory and rest points.
    Phase(Args),
    /// Equilibrium and its classification over a parameter grid.
    Sweep(Args),
    /// Find and classify rest points.
    Classify(Args),
    /// Agent simulation only.
    Agents(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Config file, or a preset name (fig1, fig3, fig4).
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the one in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Ode,
    Agents,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Ode => Engine::Ode,
            EngineArg::Agents => Engine::Agents,
            EngineArg::Both => Engine::Both,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidState(_)
        | Error::PoolIndex { .. }
        | Error::UnsupportedShape { .. }
        | Error::DegenerateStrategies(_) => EXIT_CONFIG,
        Error::NumericalFailure { .. } | Error::DegenerateState | Error::NotRestPoint { .. } => EXIT_NUMERICAL,
        Error::EmptyPool { .. } | Error::Io(_) => EXIT_OTHER,
    }
}

fn run(cmd: Command) -> Result<(Artifacts, PathBuf), Error> {
    let (args, f): (Args, fn(&ExperimentConfig) -> poolgame_core::Result<Artifacts>) = match cmd {
        Command::Evolve(a) => (a, experiments::cmd_evolve),
        Command::Phase(a) => (a, experiments::cmd_phase),
        Command::Sweep(a) => (a, experiments::cmd_sweep),
        Command::Classify(a) => (a, experiments::cmd_classify),
        Command::Agents(a) => (a, experiments::cmd_agents),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(e) = args.engine {
        cfg.engine = e.into();
    }
    let out = args.out.unwrap_or_else(|| cfg.output.clone());
    log::info!("scenario {} -> {}", cfg.scenario, out.display());
    let artifacts = f(&cfg)?;
    Ok((artifacts, out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POOLGAME_LOG", "warn")).init();
    let cli = Cli::parse();
    let (artifacts, out) = match run(cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match artifacts.write_to(&out) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let mut stdout = std::io::stdout().lock();
    for line in &artifacts.summary {
        let _ = writeln!(stdout, "{line}");
    }
    for path in &written {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    match artifacts.status() {
        Status::Converged => ExitCode::SUCCESS,
        Status::NotConverged => {
            eprintln!("warning: run did not converge");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}
