//! Experiment orchestration: configs in, metric CSVs and a JSON report out.

pub mod config;
pub mod experiments;
pub mod metrics;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{parse_config, parse_config_str, parse_config_with, ConfigFile, ExperimentConfig, ExperimentKind, Overrides, Thresholds};
pub use experiments::{checks_for, data_seed, run_seed, RunError};
pub use metrics::{aggregate, read_metrics, write_checks, write_metrics, Aggregate, Check, MetricRow, Relation};

use crate::error::{LabError, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKS_FILE: &str = "checks.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TRACES_DIR: &str = "traces";

/// Process exit codes of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Pass = 0,
    ThresholdFail = 1,
    ConfigError = 2,
    NumericalError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Status for an error that stopped a command before any report.
    pub fn for_error(e: &LabError) -> Self {
        if e.is_numerical() {
            ExitStatus::NumericalError
        } else {
            ExitStatus::ConfigError
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLog {
    pub label: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub data_seed: u64,
    pub seeds: Vec<SeedLog>,
    pub aggregates: Vec<Aggregate>,
    pub checks: Vec<Check>,
    pub errors: Vec<RunError>,
    pub passed: bool,
    pub status: ExitStatus,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn aggregate(&self, section: &str, key: u64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.section == section && a.key == key)
    }

    fn judge(&mut self) {
        self.passed = self.errors.is_empty() && self.checks.iter().all(|c| c.passed);
        self.status = if !self.errors.is_empty() {
            ExitStatus::NumericalError
        } else if self.passed {
            ExitStatus::Pass
        } else {
            ExitStatus::ThresholdFail
        };
    }

    /// One line per check, for terminals.
    pub fn summary(&self) -> String {
        let mut s = format!("{} ({:.1} s)\n", self.experiment, self.wall_clock_seconds);
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("  {verdict} {} = {:.6e} {} {:e}\n", c.name, c.value, c.relation.symbol(), c.threshold));
        }
        for e in &self.errors {
            s.push_str(&format!("  ERROR seed={:?} key={:?}: {}\n", e.seed, e.key, e.message));
        }
        s
    }
}

fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(dir.join(REPORT_FILE), text + "\n")?;
    Ok(())
}

/// Runs one experiment and writes `metrics.csv`, `checks.csv`,
/// `report.json` (and training traces) into `cfg.out`. Failures inside runs
/// are recorded in the report; only config and I/O errors are returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let out = experiments::run(cfg)?;
    if !out.traces.is_empty() {
        let dir = cfg.out.join(TRACES_DIR);
        fs::create_dir_all(&dir)?;
        for (name, trace) in &out.traces {
            let mut f = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
            trace.write_csv(&mut f)?;
        }
    }
    let aggregates = aggregate(&out.rows);
    let checks = checks_for(cfg.experiment, cfg, &out.rows, &aggregates);
    write_metrics(&cfg.out.join(METRICS_FILE), &out.rows)?;
    write_checks(&cfg.out.join(CHECKS_FILE), &checks)?;
    let mut report = ExperimentReport {
        schema: "v1".into(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        master_seed: cfg.seed,
        data_seed: data_seed(cfg.seed),
        seeds: cfg.seeds.iter().map(|&label| SeedLog { label, seed: run_seed(cfg.seed, label) }).collect(),
        aggregates,
        checks,
        errors: out.errors,
        passed: false,
        status: ExitStatus::Pass,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    report.judge();
    write_report(&cfg.out, &report)?;
    Ok(report)
}

/// Recomputes aggregates and checks of a finished run from its metric rows
/// and rewrites `checks.csv` and `report.json`.
pub fn report_dir(dir: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    let mut report: ExperimentReport =
        serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", dir.join(REPORT_FILE).display())))?;
    let rows = read_metrics(&dir.join(METRICS_FILE))?;
    report.aggregates = aggregate(&rows);
    report.checks = checks_for(report.experiment, &report.config, &rows, &report.aggregates);
    report.judge();
    write_checks(&dir.join(CHECKS_FILE), &report.checks)?;
    write_report(dir, &report)?;
    Ok(report)
}

/// Default output directory of an experiment.
pub fn default_out(kind: ExperimentKind) -> PathBuf {
    PathBuf::from("runs").join(kind.name())
}
