//! `asl`: one entry point for generating scenario suites, perturbing them,
//! training and evaluating agents, scoring single actions, dumping rollouts,
//! and aggregating run logs.
//!
//! Exit codes: 0 success, 2 configuration error (bad flags, bad config or
//! input schema), 3 runtime error (IO, infeasible perturbation, divergence),
//! 4 remote world-model failure. Errors print as one line on stderr.

mod config;
mod ops;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use asl_core::env::EnvError;
use asl_core::evaluate::EvalError;
use asl_core::policy::PolicyError;
use asl_core::report::ReportError;
use asl_core::see::SeeError;
use asl_core::train::TrainError;

#[derive(Parser)]
#[command(name = "asl", version, about = "Simulated UI-agent lab", propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a suite of scenarios from one family.
    GenScenario {
        /// Scenario family: chain, menu_tree, or form_fill.
        #[arg(long)]
        family: String,
        /// Number of scenarios to generate.
        #[arg(long)]
        count: usize,
        /// Generation seed.
        #[arg(long)]
        seed: u64,
        /// Directory receiving one JSON file per scenario.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one perturbation to a scenario, preserving task solvability.
    Perturb {
        /// Scenario JSON file to mutate.
        #[arg(long)]
        scenario: PathBuf,
        /// Perturbation kind (see `--help` of eval for the list).
        #[arg(long)]
        kind: String,
        /// Perturbation seed.
        #[arg(long)]
        seed: u64,
        /// Output path for the mutated scenario.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the semantic equivalence classes of a task state as JSON.
    Equiv {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Task id inside the scenario.
        #[arg(long)]
        task: String,
        /// Step index along the annotated solution (0 = initial state).
        #[arg(long, default_value_t = 0)]
        step: usize,
    },
    /// Train an agent from a JSON config; writes CSV log, params, manifest.
    Train {
        /// Config file; see the README for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (outputs are identical for any value).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Evaluate a trained agent, optionally under perturbations.
    Eval {
        /// Policy checkpoint.
        #[arg(long)]
        params: PathBuf,
        /// Scenario file or directory; repeatable.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// JSON file {"kinds": [...]} selecting perturbations.
        #[arg(long)]
        perturb: Option<PathBuf>,
        /// Number of seeds (0..k) for perturbation draws and sampling.
        #[arg(long)]
        seeds: u64,
        /// Output CSV path; a manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Rollout mode: greedy or sampled.
        #[arg(long, default_value = "greedy")]
        mode: String,
        /// Suite name for the report rows (default: derived from the path).
        #[arg(long)]
        suite: Option<String>,
        /// Worker threads (outputs are identical for any value).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Evaluate two agents side by side on identical perturbed suites.
    Compare {
        /// Checkpoint of the baseline agent.
        #[arg(long)]
        sft: PathBuf,
        /// Checkpoint of the contrast agent.
        #[arg(long)]
        asl: PathBuf,
        /// Scenario file or directory; repeatable.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// JSON file {"kinds": [...]}; default: all perturbation kinds.
        #[arg(long)]
        perturb: Option<PathBuf>,
        /// Number of perturbation seeds (0..k).
        #[arg(long)]
        seeds: u64,
        /// Output directory for compare.csv, compare_summary.csv, manifest.
        #[arg(long)]
        out: PathBuf,
        /// Suite name for the report rows (default: derived from the path).
        #[arg(long)]
        suite: Option<String>,
        /// Worker threads (outputs are identical for any value).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Score one predicted action against the annotated one at a step.
    Score {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Task id inside the scenario.
        #[arg(long)]
        task: String,
        /// Step index along the annotated solution.
        #[arg(long)]
        step: usize,
        /// Predicted action as JSON, e.g. '{"action_type":"click","index":2}'.
        #[arg(long)]
        pred: String,
        /// Reward threshold tau.
        #[arg(long, default_value_t = 0.6)]
        tau: f64,
        /// World-model spec JSON file (default: the oracle).
        #[arg(long)]
        world_model: Option<PathBuf>,
    },
    /// Run the policy on one task and dump the trajectory as JSON.
    Rollout {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Policy checkpoint.
        #[arg(long)]
        params: PathBuf,
        /// Task id inside the scenario.
        #[arg(long)]
        task: String,
        /// Sampling seed.
        #[arg(long)]
        seed: u64,
        /// Select actions greedily instead of sampling.
        #[arg(long)]
        greedy: bool,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate run-log CSVs: mean/stddev across seeds per group.
    Report {
        /// Input CSV files with identical columns.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output CSV path; a manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also render the summary as an SVG line chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

/// CLI failure, bucketed by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Remote(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Remote(_) => 4,
        }
    }

    /// Single-line stderr rendering: `error[kind]: message`.
    fn render_line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Runtime(m) => ("runtime", m),
            CliError::Remote(m) => ("remote", m),
        };
        format!("error[{kind}]: {}", msg.replace('\n', "; "))
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Parse { .. }
            | EnvError::Invalid { .. }
            | EnvError::EmptyTasks { .. }
            | EnvError::UnknownScreen { .. }
            | EnvError::UnknownTask { .. }
            | EnvError::UnknownFamily { .. }
            | EnvError::InvalidAction { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Corrupt { .. } | PolicyError::Shape { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SeeError> for CliError {
    fn from(e: SeeError) -> Self {
        match e {
            SeeError::Remote { .. } | SeeError::MalformedRemote { .. } => {
                CliError::Remote(e.to_string())
            }
            SeeError::MissingEndpoint
            | SeeError::UnknownAction { .. }
            | SeeError::OutOfRange { .. }
            | SeeError::BackendMismatch { .. } => CliError::Config(e.to_string()),
            SeeError::Env(inner) => inner.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::BadConfig { .. } | TrainError::EmptyDataset => {
                CliError::Config(e.to_string())
            }
            TrainError::See(inner) => inner.into(),
            TrainError::Env(inner) => inner.into(),
            TrainError::Policy(inner) => inner.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoTasks => CliError::Config(e.to_string()),
            EvalError::Env(inner) => inner.into(),
            EvalError::Policy(inner) => inner.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenScenario { family, count, seed, out } => {
            ops::cmd_gen_scenario(&family, count, seed, &out)
        }
        Command::Perturb { scenario, kind, seed, out } => {
            ops::cmd_perturb(&scenario, &kind, seed, &out)
        }
        Command::Equiv { scenario, task, step } => ops::cmd_equiv(&scenario, &task, step),
        Command::Train { config, out, threads } => ops::cmd_train(&config, out, threads),
        Command::Eval { params, scenario, perturb, seeds, out, mode, suite, threads } => {
            ops::cmd_eval(&params, &scenario, perturb.as_deref(), seeds, &out, &mode, suite, threads)
        }
        Command::Compare { sft, asl, scenario, perturb, seeds, out, suite, threads } => {
            ops::cmd_compare(&sft, &asl, &scenario, perturb.as_deref(), seeds, &out, suite, threads)
        }
        Command::Score { scenario, task, step, pred, tau, world_model } => {
            ops::cmd_score(&scenario, &task, step, &pred, tau, world_model.as_deref())
        }
        Command::Rollout { scenario, params, task, seed, greedy, out } => {
            ops::cmd_rollout(&scenario, &params, &task, seed, greedy, out.as_deref())
        }
        Command::Report { inputs, out, svg } => ops::cmd_report(&inputs, &out, svg.as_deref()),
    }
}

fn main() {
    // Die quietly when a downstream pipe closes, like any filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.render_line());
        std::process::exit(e.exit_code());
    }
}
