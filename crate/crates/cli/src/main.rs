use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use shardswap_core::sim::{
    model_check_swap, read_run, run_scenario, write_run, Bounds, ReportFormat, RunReport, Scenario,
};
use shardswap_core::swap::SafetyRules;

#[derive(Parser)]
#[command(name = "shardswap", version, about = "Run, audit and model-check shardswap scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

impl From<Format> for ReportFormat {
    fn from(format: Format) -> Self {
        match format {
            Format::Text => ReportFormat::Text,
            Format::Structured => ReportFormat::Structured,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario, write its trace and snapshots, and audit it.
    Run {
        /// Scenario file (TOML).
        #[arg(short, long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write trace, snapshots and report.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(short, long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Re-audit a run directory written by `run`.
    Audit {
        #[arg(short, long)]
        dir: PathBuf,
        #[arg(short, long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Explore every delivery order of one swap instance.
    Modelcheck {
        #[arg(long, default_value_t = 2)]
        max_round: u64,
        /// Cap on deliveries per schedule.
        #[arg(long)]
        max_steps: Option<u32>,
        #[arg(long, default_value_t = 20_000_000)]
        state_budget: usize,
        /// Switch off one safety rule (a, b, c or d).
        #[arg(long)]
        disable: Option<char>,
        #[arg(short, long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether everything checked out.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            format,
        } => {
            let loaded = Scenario::load(&scenario)?;
            let seed = seed.unwrap_or(loaded.seed);
            let (output, report) = run_scenario(&loaded, seed)?;
            if let Some(out) = out {
                write_run(&out, &output, &report, format.into())
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            print!("{}", report.render(format.into()));
            Ok(report.audits_passed())
        }
        Command::Audit { dir, format } => {
            let (trace, meta) = read_run(&dir).with_context(|| format!("reading {}", dir.display()))?;
            let report = RunReport::build(&trace, &meta);
            print!("{}", report.render(format.into()));
            Ok(report.audits_passed())
        }
        Command::Modelcheck {
            max_round,
            max_steps,
            state_budget,
            disable,
            format,
        } => {
            let rules = match disable {
                None => SafetyRules::ALL,
                Some(rule @ 'a'..='d') => SafetyRules::without(rule),
                Some(other) => bail!("no safety rule named {other:?}"),
            };
            let bounds = Bounds {
                max_round,
                max_steps,
                state_budget,
            };
            let report = model_check_swap(rules, bounds)?;
            match format {
                Format::Structured => println!("{}", serde_json::to_string_pretty(&report)?),
                Format::Text => {
                    println!(
                        "rounds 0..={} disabled {:?}: {} states, {} transitions, depth {}",
                        report.max_round, report.disabled_rules, report.states, report.transitions, report.depth
                    );
                    match &report.counterexample {
                        None => println!("no agreement violation"),
                        Some(steps) => {
                            println!("agreement violation after {} deliveries:", steps.len());
                            for step in steps {
                                println!("  {step}");
                            }
                        }
                    }
                }
            }
            // A violation is the expected result when a rule is disabled.
            Ok(report.safe() || disable.is_some())
        }
    }
}
