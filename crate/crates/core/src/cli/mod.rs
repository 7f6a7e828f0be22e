//! Command line front end.
//!
//! Every subcommand writes `<output-dir>/<label>.json` (the report) and
//! `<output-dir>/metadata.json` (timestamp and run summary); `simulate` also
//! writes `<label>.csv`. Exit codes: 0 pass, 1 fail, 2 error or
//! inconclusive, 3 configuration or usage error.

pub mod config;
pub mod tasks;

use crate::report::Verdict;
use clap::{Parser, Subcommand};
use config::{seed_from_env, Catalog, ConfigError};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use tasks::{Command, Outcome, Resolver};

pub const EXIT_CONFIG: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "herglotz", version, about = "Contact Lagrangian and Hamiltonian mechanics checks")]
struct Cli {
    /// JSON run configuration, layered over the built-in fixtures.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports (default: config value, else `herglotz-out`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Suppress per-task output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Run every task of the configuration in order.
    Run,
    /// List the systems and sample plans known to the configuration.
    List,
    #[command(flatten)]
    Task(Command),
}

#[derive(Serialize)]
struct TaskSummary {
    name: String,
    command: String,
    verdict: Verdict,
    max_residual: f64,
    report: String,
}

#[derive(Serialize)]
struct Metadata {
    timestamp_unix: u64,
    version: &'static str,
    config: String,
    seed_override: Option<u64>,
    tasks: Vec<TaskSummary>,
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            Verdict::Error.exit_code()
        }
    }
}

enum Failure {
    Config(ConfigError),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let seed = seed_from_env()?;
    let catalog = Catalog::load(cli.config.as_deref(), seed)?;
    let out_dir = cli
        .output_dir
        .clone()
        .or_else(|| catalog.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("herglotz-out"));
    let jobs: Vec<(String, Command, Option<String>)> = match cli.command {
        CliCommand::List => {
            for (name, sys) in &catalog.systems {
                println!("{name}\t{}\tn = {}", sys.kind(), sys.dim());
            }
            for (name, plan) in &catalog.plans {
                println!("{name}\tplan\t{:?}, {} points, seed {}", plan.mode, plan.count, plan.seed);
            }
            return Ok(0);
        }
        CliCommand::Task(cmd) => vec![(cmd.name().to_string(), cmd, None)],
        CliCommand::Run => {
            let mut jobs = Vec::new();
            for (i, t) in catalog.tasks.iter().enumerate() {
                let prefix = format!("tasks[{i}]");
                let cmd = Command::from_task(&t.command, &t.args, &prefix)?;
                let label = match &t.name {
                    Some(n) => {
                        if n.is_empty() || n.contains(['/', '\\']) || n == "metadata" {
                            return Err(ConfigError::new(format!("{prefix}.name"), "not usable as a file name").into());
                        }
                        n.clone()
                    }
                    None => format!("{i:02}-{}", cmd.name()),
                };
                if jobs.iter().any(|(l, _, _): &(String, Command, Option<String>)| *l == label) {
                    return Err(ConfigError::new(format!("{prefix}.name"), format!("duplicate task name `{label}`")).into());
                }
                jobs.push((label, cmd, Some(format!("{prefix}.args"))));
            }
            if jobs.is_empty() {
                return Err(ConfigError::new("tasks", "no tasks to run").into());
            }
            jobs
        }
    };

    // resolve everything before running anything
    let mut prepared = Vec::new();
    for (label, cmd, prefix) in &jobs {
        let resolver = Resolver {
            catalog: &catalog,
            prefix: prefix.clone(),
        };
        prepared.push((label, cmd.name(), resolver.prepare(cmd)?));
    }

    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::Io(format!("{}: {e}", out_dir.display())))?;
    let mut summaries = Vec::new();
    let mut worst = Verdict::Pass;
    for (label, command, job) in prepared {
        let outcome = job();
        let report_path = out_dir.join(format!("{label}.json"));
        write_file(&report_path, outcome.report.to_json().as_bytes())?;
        if let Some(csv) = &outcome.csv {
            write_file(&out_dir.join(format!("{label}.csv")), csv.as_bytes())?;
        }
        if !cli.quiet {
            print_outcome(label, &outcome);
        }
        worst = worst.max(outcome.report.verdict);
        summaries.push(TaskSummary {
            name: label.clone(),
            command: command.to_string(),
            verdict: outcome.report.verdict,
            max_residual: outcome.report.max_residual,
            report: format!("{label}.json"),
        });
    }
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Metadata {
        timestamp_unix,
        version: env!("CARGO_PKG_VERSION"),
        config: cli
            .config
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "builtin".into()),
        seed_override: catalog.seed_override,
        tasks: summaries,
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(&out_dir.join("metadata.json"), json.as_bytes())?;
    Ok(worst.exit_code())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn print_outcome(label: &str, outcome: &Outcome) {
    let r = &outcome.report;
    println!("{label}: {} (max residual {:.3e})", r.verdict.as_str(), r.max_residual);
    for line in &outcome.lines {
        println!("  {line}");
    }
    for d in &r.diagnostics {
        println!("  {d}");
    }
}
