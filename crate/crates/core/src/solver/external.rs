//! Adapter for an external solver binary speaking the competition output
//! grammar (`s ...` status line, `v ...` value lines).

use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cnf::{write_dimacs, write_literals, Assignment, CnfFormula, Lit};
use crate::runner::process::run_with_limit;

use super::{Capabilities, SolveOutcome, SolveStatus, SolverAdapter, SolverError};

/// How phases reach the backend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Phases are written to a file passed through the `{phases}` argument.
    #[default]
    PhaseFile,
    /// Phases are not delivered; a warning is logged per solve.
    Degraded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub path: PathBuf,
    /// Argument template. `{cnf}` and `{phases}` are substituted; in
    /// phase-file mode `--phases {phases}` is appended when absent.
    #[serde(default = "default_args")]
    pub args: Vec<String>,
    #[serde(default)]
    pub mode: PhaseMode,
}

fn default_args() -> Vec<String> {
    vec!["{cnf}".into()]
}

impl ExternalConfig {
    pub fn new(path: impl Into<PathBuf>, mode: PhaseMode) -> Self {
        ExternalConfig {
            path: path.into(),
            args: default_args(),
            mode,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    config: ExternalConfig,
}

impl ExternalSolver {
    pub fn new(config: ExternalConfig) -> Self {
        ExternalSolver { config }
    }

    fn args(&self, cnf: &str, phases: &str) -> Vec<String> {
        let mut args = self.config.args.clone();
        if self.config.mode == PhaseMode::PhaseFile && !args.iter().any(|a| a.contains("{phases}")) {
            args.push("--phases".into());
            args.push("{phases}".into());
        }
        args.iter()
            .map(|a| a.replace("{cnf}", cnf).replace("{phases}", phases))
            .collect()
    }
}

/// Parses `s`/`v` lines into a status. Value lines are only required for SAT.
pub(crate) fn parse_competition_output(stdout: &str, num_vars: u32) -> Result<SolveStatus, SolverError> {
    let mut status = None;
    let mut values = Vec::new();
    let mut terminated = false;
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("v ").or_else(|| (line == "v").then_some("")) {
            for tok in rest.split_whitespace() {
                let n: i32 = tok
                    .parse()
                    .map_err(|_| SolverError::Output(format!("bad value literal `{tok}`")))?;
                if n == 0 {
                    terminated = true;
                } else if n.unsigned_abs() > num_vars {
                    return Err(SolverError::Output(format!("literal {n} exceeds {num_vars} variables")));
                } else {
                    values.push(Lit::from_dimacs(n).expect("nonzero literal"));
                }
            }
        }
    }
    match status.as_deref() {
        Some("SATISFIABLE") => {
            if !terminated && num_vars > 0 && values.is_empty() {
                return Err(SolverError::Output("SATISFIABLE without value lines".into()));
            }
            Ok(SolveStatus::Sat(Assignment::from_literals(num_vars, values)))
        }
        Some("UNSATISFIABLE") => Ok(SolveStatus::Unsat),
        Some("UNKNOWN") => Ok(SolveStatus::Timeout),
        Some(other) => Err(SolverError::Output(format!("unknown status `{other}`"))),
        None => Err(SolverError::Output("no status line".into())),
    }
}

impl SolverAdapter for ExternalSolver {
    fn name(&self) -> &str {
        "external"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            phase_hints: self.config.mode == PhaseMode::PhaseFile,
            stats: false,
        }
    }

    fn invoke(&self, f: &CnfFormula, phases: &Assignment, timeout: Duration) -> Result<SolveOutcome, SolverError> {
        let dir = tempfile::tempdir()?;
        let cnf = dir.path().join("formula.cnf");
        let phase_path = dir.path().join("phases.txt");
        std::fs::write(&cnf, write_dimacs(f))?;
        match self.config.mode {
            PhaseMode::PhaseFile => std::fs::write(&phase_path, write_literals(&phases.to_literals()))?,
            PhaseMode::Degraded => log::warn!(
                "solver {} runs in degraded mode; phases are ignored",
                self.config.path.display()
            ),
        }
        let mut cmd = Command::new(&self.config.path);
        cmd.args(self.args(&cnf.to_string_lossy(), &phase_path.to_string_lossy()))
            .current_dir(dir.path());
        let out = run_with_limit(cmd, timeout, None).map_err(|source| SolverError::Spawn {
            path: self.config.path.display().to_string(),
            source,
        })?;
        if out.timed_out {
            return Ok(SolveOutcome {
                status: SolveStatus::Timeout,
                runtime: timeout.as_secs_f64(),
                stats: None,
            });
        }
        let code = out.exit.and_then(|e| e.code());
        if !matches!(code, Some(0 | 10 | 20)) {
            return Err(SolverError::Exit(code));
        }
        let status = parse_competition_output(&out.stdout, f.num_vars())?;
        Ok(SolveOutcome {
            status,
            runtime: out.elapsed.as_secs_f64(),
            stats: None,
        })
    }
}
