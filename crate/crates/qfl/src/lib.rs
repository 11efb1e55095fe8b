//! Batch front end for `qfl-core`.
//!
//! A scenario file names one command and its JSON input; a run writes
//! `report.json` (library version, resolved tolerances, echoed inputs,
//! results and pass/fail checks) plus any CSV or JSON artifacts into the
//! output directory.

pub mod commands;
pub mod dto;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use error::{CliError, CliResult};
use error::invalid;
use output::{to_json_bytes, write_atomic, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ValidateState,
    Evolve,
    Weyl,
    Decompose,
    Dilate,
    VerifyOracle,
    ItoTable,
    Unitarity,
    SampleField,
}

impl Command {
    /// The tolerance `--tol` overrides.
    fn primary_tolerance(self) -> &'static str {
        match self {
            Command::ValidateState | Command::Evolve => "psd",
            Command::Weyl => "duality",
            Command::Decompose => "reconstruction",
            Command::Dilate | Command::VerifyOracle => "oracle",
            Command::ItoTable | Command::Unitarity => "unitarity",
            Command::SampleField => "sampling_sigmas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// relative PSD tolerance for states and admissibility
    pub psd: f64,
    /// relative eigenvalue cut for the rank of `D`
    pub rank: f64,
    pub reconstruction: f64,
    pub symplectic: f64,
    pub oracle: f64,
    pub unitarity: f64,
    pub duality: f64,
    /// sampling checks pass within this many standard errors
    pub sampling_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: qfl_core::linalg::DEFAULT_PSD_TOL,
            rank: qfl_core::synthesis::DEFAULT_RANK_TOL,
            reconstruction: 1e-8,
            symplectic: 1e-10,
            oracle: 1e-5,
            unitarity: 1e-12,
            duality: 1e-9,
            sampling_sigmas: 5.0,
        }
    }
}

impl Tolerances {
    fn set(&mut self, name: &str, value: f64) {
        match name {
            "psd" => self.psd = value,
            "rank" => self.rank = value,
            "reconstruction" => self.reconstruction = value,
            "symplectic" => self.symplectic = value,
            "oracle" => self.oracle = value,
            "unitarity" => self.unitarity = value,
            "duality" => self.duality = value,
            "sampling_sigmas" => self.sampling_sigmas = value,
            _ => unreachable!("unknown tolerance {name}"),
        }
    }

    fn check(&self) -> CliResult<()> {
        let all = [
            self.psd,
            self.rank,
            self.reconstruction,
            self.symplectic,
            self.oracle,
            self.unitarity,
            self.duality,
            self.sampling_sigmas,
        ];
        if all.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid("tolerances must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub input: serde_json::Value,
}

/// Command-line overrides; each wins over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
    pub tol: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_CUTOFF: usize = 30;

/// Settings shared by every command after merging file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub cutoff: usize,
    pub tolerances: Tolerances,
    pub primary_tolerance: &'static str,
}

impl Resolved {
    pub fn new(scenario: &Scenario, o: &Overrides) -> CliResult<Self> {
        let mut tolerances = scenario.tolerances.unwrap_or_default();
        let primary = scenario.command.primary_tolerance();
        if let Some(t) = o.tol {
            tolerances.set(primary, t);
        }
        tolerances.check()?;
        let cutoff = o.cutoff.or(scenario.cutoff).unwrap_or(DEFAULT_CUTOFF);
        if cutoff < 2 {
            return Err(invalid("cutoff must be at least 2"));
        }
        Ok(Self {
            seed: o.seed.or(scenario.seed).unwrap_or(DEFAULT_SEED),
            cutoff,
            tolerances,
            primary_tolerance: primary,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// A file written next to the report; `columns` is set for CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub command: Command,
    pub settings: Resolved,
    pub inputs: serde_json::Value,
    pub results: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub artifacts: Vec<Artifact>,
}

/// What a command hands back before anything is written.
pub struct Outcome {
    pub results: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
    pub json_files: Vec<(String, serde_json::Value)>,
    /// printed to stdout after the run
    pub text: Option<String>,
}

impl Outcome {
    pub fn new(results: serde_json::Value) -> Self {
        Self { results, checks: Vec::new(), tables: Vec::new(), json_files: Vec::new(), text: None }
    }

    /// Records `value ≤ tolerance`.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check { name: name.into(), value, tolerance, pass: value <= tolerance });
    }

    pub fn check_flag(&mut self, name: impl Into<String>, ok: bool) {
        let value = if ok { 0.0 } else { 1.0 };
        self.checks.push(Check { name: name.into(), value, tolerance: 0.0, pass: ok });
    }
}

pub fn parse_scenario(text: &str) -> CliResult<Scenario> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    Ok(serde_json::from_value(value)?)
}

/// Runs one scenario file; returns the written report. A report with a
/// failed check is still written, and the error says so.
pub fn run(scenario_path: &Path, out_dir: &Path, overrides: &Overrides) -> CliResult<Report> {
    let text = std::fs::read_to_string(scenario_path)?;
    let scenario = parse_scenario(&text)?;
    let settings = Resolved::new(&scenario, overrides)?;
    log::info!("running {:?} with seed {} cutoff {}", scenario.command, settings.seed, settings.cutoff);
    let outcome = commands::dispatch(scenario.command, &scenario.input, &settings)?;
    let report = write_outputs(&scenario, settings, outcome, out_dir)?;
    if !report.pass {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(CliError::Numerical(format!(
            "{} (report written to {})",
            failed.join(", "),
            out_dir.join("report.json").display()
        )));
    }
    Ok(report)
}

fn write_outputs(scenario: &Scenario, settings: Resolved, outcome: Outcome, out_dir: &Path) -> CliResult<Report> {
    let mut artifacts = Vec::new();
    for (name, table) in &outcome.tables {
        write_atomic(&out_dir.join(name), &table.to_bytes()?)?;
        artifacts.push(Artifact { file: name.clone(), columns: Some(table.columns.clone()) });
    }
    for (name, value) in &outcome.json_files {
        write_atomic(&out_dir.join(name), &to_json_bytes(value)?)?;
        artifacts.push(Artifact { file: name.clone(), columns: None });
    }
    if let Some(text) = &outcome.text {
        let name = "summary.txt";
        write_atomic(&out_dir.join(name), text.as_bytes())?;
        artifacts.push(Artifact { file: name.into(), columns: None });
        print!("{text}");
    }
    let pass = outcome.checks.iter().all(|c| c.pass);
    let report = Report {
        version: qfl_core::VERSION,
        command: scenario.command,
        settings,
        inputs: scenario.input.clone(),
        results: outcome.results,
        checks: outcome.checks,
        pass,
        artifacts,
    };
    write_atomic(&out_dir.join("report.json"), &to_json_bytes(&report)?)?;
    Ok(report)
}

/// `out_dir/report.json`.
pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(text: &str) -> Scenario {
        parse_scenario(text).unwrap()
    }

    #[test]
    fn overrides_take_precedence() {
        let s = scenario(r#"{"command":"weyl","seed":4,"cutoff":12,"tolerances":{"psd":1e-6},"input":{}}"#);
        let r = Resolved::new(&s, &Overrides::default()).unwrap();
        assert_eq!((r.seed, r.cutoff), (4, 12));
        assert_eq!(r.tolerances.psd, 1e-6);
        assert_eq!(r.tolerances.oracle, Tolerances::default().oracle);
        let o = Overrides { seed: Some(9), cutoff: Some(20), tol: Some(1e-3) };
        let r = Resolved::new(&s, &o).unwrap();
        assert_eq!((r.seed, r.cutoff), (9, 20));
        assert_eq!(r.primary_tolerance, "duality");
        assert_eq!(r.tolerances.duality, 1e-3);
    }

    #[test]
    fn bad_settings_rejected() {
        let s = scenario(r#"{"command":"evolve","input":{}}"#);
        let o = Overrides { tol: Some(-1.0), ..Default::default() };
        assert_eq!(Resolved::new(&s, &o).unwrap_err().exit_code(), 1);
        let o = Overrides { cutoff: Some(1), ..Default::default() };
        assert_eq!(Resolved::new(&s, &o).unwrap_err().exit_code(), 1);
        assert_eq!(parse_scenario("{").unwrap_err().exit_code(), 3);
        assert_eq!(parse_scenario(r#"{"command":"nope"}"#).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn checks_record_pass_state() {
        let mut o = Outcome::new(serde_json::Value::Null);
        o.check_le("a", 1.0, 1.0);
        o.check_le("b", 1.0 + 1e-15, 1.0);
        o.check_flag("c", false);
        let pass: Vec<bool> = o.checks.iter().map(|c| c.pass).collect();
        assert_eq!(pass, [true, false, false]);
    }
}
