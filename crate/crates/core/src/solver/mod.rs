//! Phase-seeded solving: hand a complete assignment to a solver as default
//! phases and time how long it takes.

mod external;
mod mini;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{count_unsat, Assignment, CnfFormula};

pub use external::{ExternalConfig, ExternalSolver, PhaseMode};
pub use mini::{mini_solve, MiniSolver};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Sat(Assignment),
    Unsat,
    Timeout,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Sat(_) => "SAT",
            SolveStatus::Unsat => "UNSAT",
            SolveStatus::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    /// Decisions whose value differed from the supplied phase.
    pub phase_deviations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Wall-clock seconds around the backend invocation.
    pub runtime: f64,
    /// `None` when the backend does not report statistics.
    pub stats: Option<SolverStats>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("phases cover {got} of {need} variables")]
    IncompletePhases { got: usize, need: u32 },
    #[error("failed to launch solver `{path}`: {source}")]
    Spawn {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver communication failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("unparseable solver output: {0}")]
    Output(String),
    #[error("solver exited with unexpected code {0:?}")]
    Exit(Option<i32>),
    #[error("solver reported a model that leaves {0} clauses unsatisfied")]
    Integrity(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub phase_hints: bool,
    pub stats: bool,
}

/// A SAT backend that accepts default phases.
pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    fn invoke(&self, f: &CnfFormula, phases: &Assignment, timeout: Duration) -> Result<SolveOutcome, SolverError>;
}

/// Runs `adapter` with `phases` and re-validates any returned model.
pub fn solve_with_phases(
    f: &CnfFormula,
    phases: &Assignment,
    timeout: Duration,
    adapter: &dyn SolverAdapter,
) -> Result<SolveOutcome, SolverError> {
    if !phases.is_total_over(f.num_vars()) {
        return Err(SolverError::IncompletePhases {
            got: phases.num_assigned(),
            need: f.num_vars(),
        });
    }
    let outcome = adapter.invoke(f, phases, timeout)?;
    if let SolveStatus::Sat(model) = &outcome.status {
        let unsat = count_unsat(f, model);
        if unsat.unsat + unsat.undetermined > 0 {
            return Err(SolverError::Integrity(unsat.unsat + unsat.undetermined));
        }
    }
    Ok(outcome)
}
