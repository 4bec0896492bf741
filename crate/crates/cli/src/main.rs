//! Command-line front end: run experiments, generate datasets, re-aggregate
//! finished runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use rnn_ntk_lab::concept::{gen_dataset, save_dataset, TargetFunction};
use rnn_ntk_lab::harness::config::DEFAULTS_HELP;
use rnn_ntk_lab::harness::{parse_config_with, report_dir, run_experiment, ExitStatus, ExperimentReport, Overrides};
use rnn_ntk_lab::{LabError, Result};

#[derive(Parser)]
#[command(name = "rnn-ntk-lab", version, about = "Finite-width RNN kernels against their infinite-width limits")]
#[command(after_help = "Exit codes: 0 pass, 1 threshold fail, 2 config error, 3 numerical error.\n\
Set RNN_NTK_LAB_THREADS to cap internal parallelism.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    #[command(after_help = DEFAULTS_HELP)]
    Run {
        config: PathBuf,
        /// Seed-runs executed concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample a labeled dataset for a target.
    #[command(after_help = "target.json: {\"target\": {...}, \"d\": 10, \"L\": 5, \"C_min\": 1, \"C_max\": 1, \"seed\": 0}\n\
Writes a JSON manifest to FILE and the sequences and labels next to it.")]
    GenData {
        target: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute aggregates and checks of a finished run.
    Report { dir: PathBuf },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    target: TargetFunction,
    d: usize,
    #[serde(rename = "L")]
    len: usize,
    #[serde(rename = "C_min", default = "one")]
    c_min: f64,
    #[serde(rename = "C_max", default = "one")]
    c_max: f64,
    #[serde(default)]
    seed: u64,
}

fn one() -> f64 {
    1.0
}

fn gen_data(target: &Path, n: usize, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(target).map_err(|e| LabError::Config(format!("{}: {e}", target.display())))?;
    let tf: TargetFile =
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", target.display())))?;
    tf.target.validate(tf.d, tf.len).map_err(|e| LabError::Config(format!("{}: {e}", target.display())))?;
    if n == 0 || !(tf.c_min > 0.0 && tf.c_min <= tf.c_max) {
        return Err(LabError::Config("need n > 0 and 0 < C_min ≤ C_max".into()));
    }
    let ds = gen_dataset(&tf.target, n, tf.d, tf.len, tf.c_min, tf.c_max, tf.seed)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_dataset(out, &ds, &tf.target)?;
    println!("wrote {} samples to {} (margin scale {:.6e})", ds.len(), out.display(), ds.margin_scale);
    Ok(())
}

fn finish(report: Result<ExperimentReport>) -> ExitCode {
    match report {
        Ok(r) => {
            print!("{}", r.summary());
            ExitCode::from(r.status.code() as u8)
        }
        Err(e) => fail(e),
    }
}

fn fail(e: LabError) -> ExitCode {
    eprintln!("error: {e}");
    let status = match e {
        LabError::Io(_) | LabError::Json(_) | LabError::Format(_) => ExitStatus::ConfigError,
        ref other => ExitStatus::for_error(other),
    };
    ExitCode::from(status.code() as u8)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RNN_NTK_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| LabError::Config(format!("RNN_NTK_LAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return fail(e);
    }
    match cli.command {
        Command::Run { config, jobs, out, seed } => {
            let overrides = Overrides { out, seed, jobs };
            match parse_config_with(&config, &overrides) {
                Ok(cfg) => finish(run_experiment(&cfg)),
                Err(e) => fail(e),
            }
        }
        Command::GenData { target, n, out } => match gen_data(&target, n, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Report { dir } => finish(report_dir(&dir)),
    }
}
