//! Config-driven experiments: single runs, convergence studies, oracle
//! comparisons, estimate suites and parameter sweeps.
//!
//! Every run writes into its own directory: trajectory CSVs, `report.jsonl`
//! (one JSON object per check) and `manifest.json`.

mod config;
mod kinds;
mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    config_from_table, load_config, parse_config, CheckKind, ConvergeSection, EstimatesSection,
    ExperimentConfig, HypothesesSection, OracleSection, RunKind, SweepSection,
};
pub use sweep::{expand_sweep, SweepPoint};

use crate::estimates::{EstimateError, ReportEntry};
use crate::fdm::FdmError;
use crate::solver::SolverError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("galerkin_solver: {0}")]
    Solver(#[from] SolverError),
    #[error("fdm_oracle: {0}")]
    Fdm(#[from] FdmError),
    #[error("estimates: {0}")]
    Estimate(#[from] EstimateError),
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Io { .. } => EXIT_IO,
            RunnerError::Solver(SolverError::StudyAborted { .. })
            | RunnerError::Estimate(EstimateError::Incomplete) => EXIT_BLOWUP,
            _ => EXIT_PRECONDITION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub jobs: usize,
    pub dump_modes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Blowup {
    pub run: String,
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub entries: Vec<ReportEntry>,
    pub blowups: Vec<Blowup>,
    /// Human-readable findings, e.g. hypothesis violation witnesses.
    pub messages: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// Set by sweeps, which aggregate exit codes of their runs.
    pub child_exit: Option<i32>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        let own = if !self.blowups.is_empty() {
            EXIT_BLOWUP
        } else if self.entries.iter().all(ReportEntry::passed) {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        };
        own.max(self.child_exit.unwrap_or(EXIT_OK))
    }
}

/// Collects artifacts of one run directory.
pub(crate) struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunnerError> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunnerError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }
}

pub(crate) fn io(path: &Path, source: std::io::Error) -> RunnerError {
    RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Digest for checks computed by the runner itself.
pub(crate) fn entry_digest(check_id: &str, config: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(check_id.as_bytes());
    h.update(config.digest().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct ArtifactRecord {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kind: RunKind,
    name: Option<&'a str>,
    config_digest: String,
    problem_digest: String,
    solver: &'a crate::trajectory::SolverConfig,
    artifacts: Vec<ArtifactRecord>,
    checks: BTreeMap<String, crate::estimates::Verdict>,
    blowups: &'a [Blowup],
    exit_code: i32,
    wall_time_seconds: f64,
}

/// Runs one experiment and writes its artifacts under `opts.out`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunnerError> {
    let start = Instant::now();
    let mut art = Artifacts::new(&opts.out)?;
    let mut outcome = match config.kind {
        RunKind::Simulate => kinds::simulate(config, opts, &mut art)?,
        RunKind::CheckHypotheses => kinds::check_hypotheses(config)?,
        RunKind::Converge => kinds::converge(config, &mut art)?,
        RunKind::CompareOracle => kinds::compare_oracle(config, opts, &mut art)?,
        RunKind::VerifyEstimates => kinds::verify_estimates(config, opts, &mut art)?,
        RunKind::Sweep => sweep::run_sweep(config, opts, &mut art)?,
    };
    let report: String = outcome
        .entries
        .iter()
        .map(|e| e.to_json_line() + "\n")
        .collect();
    art.write("report.jsonl", report.as_bytes())?;

    let artifacts = art
        .files
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| io(p, e))?;
            Ok(ArtifactRecord {
                file: p.strip_prefix(&art.dir).unwrap_or(p).display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<Vec<_>, RunnerError>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        kind: config.kind,
        name: config.name.as_deref(),
        config_digest: config.digest(),
        problem_digest: config.problem.digest(),
        solver: &config.solver,
        artifacts,
        checks: outcome
            .entries
            .iter()
            .map(|e| (e.check_id.clone(), e.verdict))
            .collect(),
        blowups: &outcome.blowups,
        exit_code: outcome.exit_code(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    art.write("manifest.json", json.as_bytes())?;
    outcome.artifacts = art.files;
    Ok(outcome)
}
