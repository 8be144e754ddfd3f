//! `raflow` — rate allocation and validation for random-access multi-hop
//! scenarios.
//!
//! Exit codes: 0 success (including infeasible solver rows), 1 usage
//! errors, 2 scenario file/schema errors, 3 internal errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

use commands::CliError;

#[derive(Parser)]
#[command(name = "raflow", version, about = "Throughput-optimal flow allocation for random-access wireless multi-hop networks", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for throughput-optimal source rates, optionally over a
    /// SINR-threshold sweep; writes one CSV row per threshold.
    Solve(SolveArgs),
    /// Run the slotted Monte Carlo simulator and compare against the
    /// analytic model.
    Simulate(SimulateArgs),
    /// Compare multipath allocation with the best-path baseline.
    Baseline(BaselineArgs),
    /// Evaluate the non-convexity condition on a two-flow/one-relay
    /// topology.
    CheckConvexity(CheckConvexityArgs),
    /// Print the allocation problem (variables, objective, constraints).
    DumpProblem(DumpProblemArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    AllNodes,
    PathNodes,
}

impl From<PolicyArg> for raflow::topology::InterferencePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::AllNodes => Self::AllNodes,
            PolicyArg::PathNodes => Self::PathNodes,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// SINR threshold sweep `start:stop:step` (inclusive when the stop
    /// lands on the grid) or a single value.
    #[arg(long, value_name = "A:B:S")]
    sweep_gamma: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver restarts (default 8).
    #[arg(long)]
    restarts: Option<u32>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's interferer policy.
    #[arg(long, value_enum)]
    interference_policy: Option<PolicyArg>,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Comma-separated per-flow rates in ascending flow-id order; when
    /// omitted the rates come from solving each sweep point.
    #[arg(long)]
    rates: Option<String>,
    /// Slots per run.
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    /// Warmup slots excluded from statistics (default: slots / 10).
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, value_name = "A:B:S")]
    sweep_gamma: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    interference_policy: Option<PolicyArg>,
}

#[derive(Args)]
struct BaselineArgs {
    scenario: PathBuf,
    /// SINR threshold sweep (default 0.25:2.0:0.25).
    #[arg(long, value_name = "A:B:S", default_value = "0.25:2.0:0.25")]
    sweep_gamma: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    interference_policy: Option<PolicyArg>,
}

#[derive(Args)]
struct CheckConvexityArgs {
    scenario: PathBuf,
    /// Evaluate at this uniform SINR threshold instead of the scenario's.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    interference_policy: Option<PolicyArg>,
}

#[derive(Args)]
struct DumpProblemArgs {
    scenario: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    interference_policy: Option<PolicyArg>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => commands::cmd_solve(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Baseline(args) => commands::cmd_baseline(&args),
        Command::CheckConvexity(args) => commands::cmd_check_convexity(&args),
        Command::DumpProblem(args) => commands::cmd_dump_problem(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Scenario(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
