//! `driftrank` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::harness::{export_csv, run_scenario, ConfigError, HarnessError, ScenarioConfig, CONFIG_KEYS, TRACE_FILE};
use crate::network::{generate_geometric_topology, metropolis_weights};
use crate::oracle::checks;
use crate::signal::write_stream_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Threshold used for the convergence summary printed after a run.
const SUMMARY_THRESHOLD_DB: f64 = -25.0;
const SUMMARY_WINDOW: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "driftrank", version, about = "Distributed reduced-rank estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario and write mse_traces.csv and cost.csv.
    Run(ScenarioArgs),
    /// Write the scenario's topology edge list and combination weights.
    Topology(ScenarioArgs),
    /// Run the analytic invariant suite.
    OracleCheck,
    /// List every config key with its default.
    Keys,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (`key = value` lines); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set runs=N`.
    #[arg(long)]
    runs: Option<usize>,
    /// Replaces both the topology and the signal seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the summary table.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Invalid(format!("--set expects KEY=VALUE, got {item:?}")))?;
            config.set(key.trim(), value.trim())?;
        }
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        if let Some(seed) = self.seed {
            config.topology_seed = seed;
            config.signal_seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn run(args: &ScenarioArgs) -> Result<(), CliError> {
    let config = args.resolve()?;
    info!("running {} runs x {} iterations (M={}, D={})", config.runs, config.iterations, config.m, config.d);
    let result = run_scenario(&config)?;
    export_csv(&args.out, &result)?;
    if let Some(streams) = &result.streams {
        let path = args.out.join("streams.csv");
        write_stream_csv(&path, streams).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    if args.quiet {
        return Ok(());
    }
    println!("{:<16} {:>12} {:>14} {:>10} {:>10}", "algorithm", "steady [dB]", "iters to -25dB", "MACs", "scalars");
    for (trace, cost) in result.traces.iter().zip(&result.cost.entries) {
        let crossing = trace
            .iterations_to_reach(SUMMARY_THRESHOLD_DB, SUMMARY_WINDOW)
            .map_or_else(|| "never".to_string(), |i| i.to_string());
        println!(
            "{:<16} {:>12.2} {:>14} {:>10} {:>10}",
            trace.algorithm,
            trace.steady_state_db(100.min(config.iterations)),
            crossing,
            cost.macs_per_node_iter,
            cost.scalars_tx_per_node_iter
        );
    }
    println!("wrote {}", args.out.join(TRACE_FILE).display());
    Ok(())
}

fn topology(args: &ScenarioArgs) -> Result<(), CliError> {
    let config = args.resolve()?;
    let topology = generate_geometric_topology(config.n_nodes, config.radius, config.topology_seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    create_dir(&args.out)?;
    let edges = args.out.join("topology.txt");
    let weights = args.out.join("weights.csv");
    topology.write_edge_list(&edges).map_err(|e| CliError::Runtime(e.to_string()))?;
    metropolis_weights(&topology).write_csv(&weights).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("wrote {} and {}", edges.display(), weights.display());
    Ok(())
}

fn oracle_check() -> Result<(), CliError> {
    let outcomes = checks::run_all();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} oracle check(s) failed")));
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn parse_and_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Topology(args) => topology(args),
        Command::OracleCheck => oracle_check(),
        Command::Keys => {
            for (key, doc) in CONFIG_KEYS {
                println!("{key:<20} {doc}");
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}
