//! Run reports and the on-disk layout of a run directory.
//!
//! ```text
//! <dir>/trace.bin               trace events
//! <dir>/payloads.bin            event payloads by digest
//! <dir>/meta.json               RunMeta
//! <dir>/snapshots/authority-<i>.json
//! <dir>/report.txt | report.json
//! ```

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::audit::{audit, AuditResult};
use super::executor::{RunMeta, RunOutput, Simulation};
use super::scenario::{ConfigError, Scenario};
use super::trace::{OutcomeRecord, Record, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub events: u64,
    pub end_time: u64,
    pub budget_exceeded: Option<String>,
    pub outcomes: Vec<OutcomeLine>,
    pub audits: Vec<AuditResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeLine {
    pub client: String,
    pub ok: bool,
    pub summary: String,
}

impl RunReport {
    pub fn build(trace: &Trace, meta: &RunMeta) -> RunReport {
        let outcomes = trace
            .records()
            .filter_map(|(_, record)| match record {
                Record::Outcome(OutcomeRecord { name, ok, summary }) => Some(OutcomeLine {
                    client: name,
                    ok,
                    summary,
                }),
                _ => None,
            })
            .collect();
        RunReport {
            scenario: meta.scenario.clone(),
            seed: meta.seed,
            events: meta.events,
            end_time: meta.end_time,
            budget_exceeded: meta.budget_exceeded.clone(),
            outcomes,
            audits: audit(trace, meta),
        }
    }

    pub fn audits_passed(&self) -> bool {
        self.audits.iter().all(|audit| audit.passed)
    }

    pub fn audit(&self, name: &str) -> Option<&AuditResult> {
        self.audits.iter().find(|audit| audit.name == name)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.render_text(),
            ReportFormat::Structured => {
                let mut text = serde_json::to_string_pretty(self).expect("serializable");
                text.push('\n');
                text
            }
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} seed {}: {} events, ended at t={}",
            self.scenario, self.seed, self.events, self.end_time
        );
        if let Some(reason) = &self.budget_exceeded {
            let _ = writeln!(out, "budget exceeded: {reason}");
        }
        let _ = writeln!(out, "\nclients:");
        for outcome in &self.outcomes {
            let status = if outcome.ok { "ok  " } else { "FAIL" };
            let summary = outcome
                .summary
                .strip_prefix(&format!("{}: ", outcome.client))
                .unwrap_or(&outcome.summary);
            let _ = writeln!(out, "  {status} {}: {summary}", outcome.client);
        }
        let _ = writeln!(out, "\naudits:");
        for audit in &self.audits {
            let status = if audit.passed { "pass" } else { "FAIL" };
            let _ = writeln!(out, "  {status} {}", audit.name);
            for violation in &audit.violations {
                match violation.event {
                    Some(event) => {
                        let _ = writeln!(out, "       event {event}: {}", violation.message);
                    }
                    None => {
                        let _ = writeln!(out, "       final state: {}", violation.message);
                    }
                }
            }
        }
        out
    }
}

/// Runs a scenario and audits the result.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<(RunOutput, RunReport), ConfigError> {
    let output = Simulation::new(scenario, seed)?.run();
    let report = RunReport::build(&output.trace, &output.meta);
    Ok((output, report))
}

pub fn write_run(
    directory: &Path,
    output: &RunOutput,
    report: &RunReport,
    format: ReportFormat,
) -> io::Result<()> {
    std::fs::create_dir_all(directory.join("snapshots"))?;
    output.trace.write_to(directory)?;
    std::fs::write(directory.join("meta.json"), to_json(&output.meta)?)?;
    for snapshot in &output.snapshots {
        let path = directory
            .join("snapshots")
            .join(format!("authority-{}.json", snapshot.authority));
        std::fs::write(path, to_json(snapshot)?)?;
    }
    let name = match format {
        ReportFormat::Text => "report.txt",
        ReportFormat::Structured => "report.json",
    };
    std::fs::write(directory.join(name), report.render(format))
}

/// Reads back what [`write_run`] stored.
pub fn read_run(directory: &Path) -> io::Result<(Trace, RunMeta)> {
    let trace = Trace::read_from(directory)?;
    let meta = std::fs::read(directory.join("meta.json"))?;
    let meta = serde_json::from_slice(&meta).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    Ok((trace, meta))
}

fn to_json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    bytes.push(b'\n');
    Ok(bytes)
}
