//! Sandboxed execution of candidate local searches.
//!
//! A candidate is launched as
//! `<entry...> <instance> <formula.cnf> <varmap.json> <soft-seconds>` in a
//! fresh working directory and must print signed literals terminated by `0`
//! on stdout. The source text, if any, is written to `candidate` in that
//! directory and substituted for `{source}` in the entry template.

mod error;
mod pool;
pub(crate) mod process;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cnf::{parse_dimacs, parse_literal_stream, write_dimacs, Assignment, CnfFormula};
use crate::encodings::VarMap;

pub use error::extract_error_context;
pub use pool::parallel_map;

pub const SOURCE_FILE: &str = "candidate";
pub const VERIFY_SOFT: f64 = 30.0;
pub const VERIFY_HARD: f64 = 60.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "version")]
pub enum Origin {
    Base,
    Refined(u32),
    Builtin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub id: String,
    pub source: String,
    /// Command template; `{source}` is replaced by the written source path.
    pub entry: Vec<String>,
    pub origin: Origin,
    pub lineage: Option<String>,
}

impl CandidateSpec {
    /// A baseline served by the `lsgen-candidate` executable.
    pub fn builtin(algo: &str, exe: &Path) -> Self {
        CandidateSpec {
            id: format!("builtin-{algo}"),
            source: String::new(),
            entry: vec![exe.display().to_string(), algo.to_string()],
            origin: Origin::Builtin,
            lineage: None,
        }
    }

    /// A Python program run with `python3`.
    pub fn python(id: impl Into<String>, source: impl Into<String>, origin: Origin, lineage: Option<String>) -> Self {
        CandidateSpec {
            id: id.into(),
            source: source.into(),
            entry: vec!["python3".into(), "{source}".into()],
            origin,
            lineage,
        }
    }

    /// Refinement version: 1 for base candidates.
    pub fn version(&self) -> Option<u32> {
        match self.origin {
            Origin::Base => Some(1),
            Origin::Refined(v) => Some(v),
            Origin::Builtin => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", tag = "status")]
pub enum RunStatus {
    Ok,
    /// Returned after the soft limit but before the hard one.
    SoftTimeoutOk,
    HardTimeout,
    RuntimeError { message: String, line: Option<u32> },
    InvalidOutput { reason: String },
}

impl RunStatus {
    pub fn returned(&self) -> bool {
        matches!(self, RunStatus::Ok | RunStatus::SoftTimeoutOk)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Ok => "OK",
            RunStatus::SoftTimeoutOk => "SOFT_TIMEOUT_OK",
            RunStatus::HardTimeout => "HARD_TIMEOUT",
            RunStatus::RuntimeError { .. } => "RUNTIME_ERROR",
            RunStatus::InvalidOutput { .. } => "INVALID_OUTPUT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub status: RunStatus,
    /// Present iff the status is `Ok` or `SoftTimeoutOk`.
    pub assignment: Option<Assignment>,
    /// Seconds.
    pub wall_time: f64,
}

impl RunResult {
    fn failed(status: RunStatus, wall_time: f64) -> Self {
        RunResult {
            status,
            assignment: None,
            wall_time,
        }
    }
}

/// Instance, encoded formula and variable map on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    pub instance: PathBuf,
    pub cnf: PathBuf,
    pub varmap: PathBuf,
    pub num_vars: u32,
}

impl Bundle {
    pub const INSTANCE: &'static str = "instance";
    pub const CNF: &'static str = "formula.cnf";
    pub const VARMAP: &'static str = "varmap.json";

    /// Writes `<dir>/{instance, formula.cnf, varmap.json}`.
    pub fn write(dir: &Path, instance: &[u8], formula: &CnfFormula, varmap: &VarMap) -> io::Result<Bundle> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(Self::INSTANCE), instance)?;
        fs::write(dir.join(Self::CNF), write_dimacs(formula))?;
        fs::write(dir.join(Self::VARMAP), varmap.to_json())?;
        Self::at(dir, formula.num_vars())
    }

    /// Opens an existing bundle, reading the variable count from the CNF.
    pub fn open(dir: &Path) -> io::Result<Bundle> {
        let text = fs::read(dir.join(Self::CNF))?;
        let f = parse_dimacs(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Self::at(dir, f.num_vars())
    }

    fn at(dir: &Path, num_vars: u32) -> io::Result<Bundle> {
        let dir = fs::canonicalize(dir)?;
        Ok(Bundle {
            instance: dir.join(Self::INSTANCE),
            cnf: dir.join(Self::CNF),
            varmap: dir.join(Self::VARMAP),
            num_vars,
        })
    }

    pub fn formula(&self) -> io::Result<CnfFormula> {
        parse_dimacs(&fs::read(&self.cnf)?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

fn seconds_arg(s: f64) -> String {
    if s.fract() == 0.0 {
        format!("{}", s as u64)
    } else {
        format!("{s}")
    }
}

/// Parses candidate stdout into a partial assignment over `1..=num_vars`.
pub fn parse_candidate_output(stdout: &str, num_vars: u32) -> Result<Assignment, String> {
    let lits = parse_literal_stream(stdout)?;
    let mut seen = HashSet::with_capacity(lits.len());
    for lit in &lits {
        let v = lit.var();
        if v.id() > num_vars {
            return Err(format!("literal {lit} outside 1..={num_vars}"));
        }
        if !seen.insert(v) {
            return Err(format!("duplicate assignment for var {}", v.id()));
        }
    }
    Ok(Assignment::from_literals(num_vars, lits))
}

fn command_for(c: &CandidateSpec, workdir: &Path, bundle: &Bundle, soft: f64) -> Option<Command> {
    let source = workdir.join(SOURCE_FILE);
    let mut parts = c
        .entry
        .iter()
        .map(|a| a.replace("{source}", &source.to_string_lossy()));
    let mut cmd = Command::new(parts.next()?);
    cmd.args(parts)
        .arg(&bundle.instance)
        .arg(&bundle.cnf)
        .arg(&bundle.varmap)
        .arg(seconds_arg(soft))
        .current_dir(workdir);
    Some(cmd)
}

/// Runs `c` on `bundle`. Every failure is reported through the status.
pub fn run(c: &CandidateSpec, bundle: &Bundle, soft: f64, hard: f64, cancel: Option<&AtomicBool>) -> RunResult {
    assert!(hard >= soft, "hard limit below soft limit");
    let workdir = match tempfile::Builder::new().prefix("lsgen-run-").tempdir() {
        Ok(d) => d,
        Err(e) => return RunResult::failed(launch_error(e), 0.0),
    };
    if let Err(e) = fs::write(workdir.path().join(SOURCE_FILE), &c.source) {
        return RunResult::failed(launch_error(e), 0.0);
    }
    let limit = Duration::from_secs_f64(hard);
    let mut attempt = 0;
    let out = loop {
        let Some(cmd) = command_for(c, workdir.path(), bundle, soft) else {
            return RunResult::failed(
                RunStatus::RuntimeError {
                    message: "empty entry command".into(),
                    line: None,
                },
                0.0,
            );
        };
        match process::run_with_limit(cmd, limit, cancel) {
            Ok(out) => break out,
            Err(e) if attempt == 0 => {
                log::warn!("candidate {} failed to launch ({e}); retrying once", c.id);
                attempt += 1;
            }
            Err(e) => return RunResult::failed(launch_error(e), 0.0),
        }
    };
    let wall = out.elapsed.as_secs_f64();
    if out.timed_out {
        return RunResult::failed(RunStatus::HardTimeout, wall);
    }
    if out.interrupted {
        return RunResult::failed(
            RunStatus::RuntimeError {
                message: "run interrupted".into(),
                line: None,
            },
            wall,
        );
    }
    let exit = out.exit.expect("exited process has a status");
    if !exit.success() {
        let (message, line) = extract_error_context(&out.stderr, exit.code());
        return RunResult::failed(RunStatus::RuntimeError { message, line }, wall);
    }
    match parse_candidate_output(&out.stdout, bundle.num_vars) {
        Ok(a) => RunResult {
            status: if wall <= soft { RunStatus::Ok } else { RunStatus::SoftTimeoutOk },
            assignment: Some(a),
            wall_time: wall,
        },
        Err(reason) => RunResult::failed(RunStatus::InvalidOutput { reason }, wall),
    }
}

fn launch_error(e: io::Error) -> RunStatus {
    RunStatus::RuntimeError {
        message: format!("failed to launch candidate: {e}"),
        line: None,
    }
}

/// Verification run on an easy instance: soft 30 s, hard 60 s.
pub fn verify(c: &CandidateSpec, easy: &Bundle, cancel: Option<&AtomicBool>) -> RunResult {
    run(c, easy, VERIFY_SOFT, VERIFY_HARD, cancel)
}
