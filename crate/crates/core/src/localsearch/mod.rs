//! Local-search baselines: WalkSAT, GSAT, sampled tabu search, and two
//! encoding-aware searches (native colouring, level-by-level tree search).
//!
//! Every search is deterministic given the formula and `SearchParams::seed`
//! as long as it stops on `max_flips` rather than on the clock.

mod bddt;
mod coloring;
mod rng;
mod sat;
mod state;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, CnfFormula};

pub use bddt::{bddt_initial_tree, bddt_level_search};
pub use coloring::{coloring_greedy_init, coloring_native_search, greedy_coloring};
pub use rng::Rng;
pub use sat::{gsat, gsat_from, tabu_sampled, tabu_sampled_from, walksat, walksat_from};
pub use state::SearchState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub seed: u64,
    /// Seconds.
    pub soft_timeout: f64,
    pub noise: f64,
    pub sample_size: usize,
    pub tabu_tenure: usize,
    pub max_flips: Option<u64>,
    /// Non-improving flips tolerated before a search changes strategy.
    pub stagnation_window: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            seed: 0,
            soft_timeout: 60.0,
            noise: 0.5,
            sample_size: 20,
            tabu_tenure: 10,
            max_flips: None,
            stagnation_window: 200,
        }
    }
}

impl SearchParams {
    pub fn with_seed(seed: u64) -> Self {
        SearchParams {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(format!("noise {} outside [0, 1]", self.noise));
        }
        if self.sample_size == 0 {
            return Err("sample_size must be at least 1".into());
        }
        if !(self.soft_timeout >= 0.0) {
            return Err(format!("soft_timeout {} is not a duration", self.soft_timeout));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub assignment: Assignment,
    pub flips: u64,
    pub best_unsat: usize,
    /// Seconds.
    pub elapsed: f64,
    pub found_model: bool,
}

/// Clock, flip budget and best-so-far bookkeeping shared by the searches.
struct Budget {
    start: Instant,
    limit: Duration,
    max_flips: Option<u64>,
    flips: u64,
    best_unsat: usize,
    best: Vec<bool>,
    since_improvement: u64,
}

impl Budget {
    fn new(p: &SearchParams, st: &SearchState) -> Self {
        Budget {
            start: Instant::now(),
            limit: Duration::from_secs_f64(p.soft_timeout.max(0.0)),
            max_flips: p.max_flips,
            flips: 0,
            best_unsat: st.num_unsat(),
            best: st.values().to_vec(),
            since_improvement: 0,
        }
    }

    fn exhausted(&self) -> bool {
        self.max_flips.is_some_and(|m| self.flips >= m) || self.start.elapsed() >= self.limit
    }

    /// Call after each flip; `true` when the best unsat count improved.
    fn record(&mut self, st: &SearchState) -> bool {
        self.flips += 1;
        if st.num_unsat() < self.best_unsat {
            self.best_unsat = st.num_unsat();
            self.best.copy_from_slice(st.values());
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    fn finish(self, f: &CnfFormula) -> SearchOutcome {
        let assignment = Assignment::from_bools(&self.best);
        debug_assert!(self.best_unsat > 0 || crate::cnf::count_unsat(f, &assignment).unsat == 0);
        SearchOutcome {
            assignment,
            flips: self.flips,
            best_unsat: self.best_unsat,
            elapsed: self.start.elapsed().as_secs_f64(),
            found_model: self.best_unsat == 0,
        }
    }
}

fn random_values(n: u32, rng: &mut Rng) -> Vec<bool> {
    (0..n).map(|_| rng.bool()).collect()
}
