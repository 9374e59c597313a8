//! A small deterministic DPLL solver used as the reference backend in tests
//! and on desk-scale instances.
//!
//! Variables are decided in increasing index order, each first on its phase;
//! backtracking is chronological. Unit propagation uses per-clause counters
//! of true and false literals over an occurrence index.

use std::time::{Duration, Instant};

use crate::cnf::{Assignment, CnfFormula, Lit};

use super::{Capabilities, SolveOutcome, SolveStatus, SolverAdapter, SolverError, SolverStats};

fn lit_index(lit: Lit) -> usize {
    2 * lit.var().index() + usize::from(!lit.polarity())
}

struct Level {
    trail_len: usize,
    lit: Lit,
    flipped: bool,
}

struct Dpll {
    clauses: Vec<Vec<Lit>>,
    occurs: Vec<Vec<u32>>,
    n_true: Vec<u32>,
    n_false: Vec<u32>,
    value: Vec<Option<bool>>,
    trail: Vec<Lit>,
    pending: Vec<u32>,
    levels: Vec<Level>,
    cursor: usize,
    stats: SolverStats,
}

impl Dpll {
    fn new(f: &CnfFormula) -> Self {
        let n = f.num_vars() as usize;
        let mut clauses = Vec::with_capacity(f.num_clauses());
        for clause in f.clauses() {
            let mut c: Vec<Lit> = clause.to_vec();
            c.sort_unstable();
            c.dedup();
            if c.iter().any(|&l| c.binary_search(&!l).is_ok()) {
                continue;
            }
            clauses.push(c);
        }
        let mut occurs = vec![Vec::new(); 2 * n];
        for (ci, c) in clauses.iter().enumerate() {
            for &l in c {
                occurs[lit_index(l)].push(ci as u32);
            }
        }
        Dpll {
            n_true: vec![0; clauses.len()],
            n_false: vec![0; clauses.len()],
            clauses,
            occurs,
            value: vec![None; n],
            trail: Vec::with_capacity(n),
            pending: Vec::new(),
            levels: Vec::new(),
            cursor: 0,
            stats: SolverStats::default(),
        }
    }

    /// Returns `false` when some clause became falsified.
    fn assign(&mut self, lit: Lit) -> bool {
        let v = lit.var().index();
        debug_assert!(self.value[v].is_none());
        self.value[v] = Some(lit.polarity());
        self.trail.push(lit);
        for &c in &self.occurs[lit_index(lit)] {
            self.n_true[c as usize] += 1;
        }
        let mut ok = true;
        for &c in &self.occurs[lit_index(!lit)] {
            let c = c as usize;
            self.n_false[c] += 1;
            if self.n_true[c] == 0 {
                let len = self.clauses[c].len() as u32;
                if self.n_false[c] == len {
                    ok = false;
                } else if self.n_false[c] + 1 == len {
                    self.pending.push(c as u32);
                }
            }
        }
        ok
    }

    fn unassign_to(&mut self, trail_len: usize) {
        while self.trail.len() > trail_len {
            let lit = self.trail.pop().expect("trail entry");
            let v = lit.var().index();
            self.value[v] = None;
            self.cursor = self.cursor.min(v);
            for &c in &self.occurs[lit_index(lit)] {
                self.n_true[c as usize] -= 1;
            }
            for &c in &self.occurs[lit_index(!lit)] {
                self.n_false[c as usize] -= 1;
            }
        }
        self.pending.clear();
    }

    fn propagate(&mut self) -> bool {
        while let Some(c) = self.pending.pop() {
            let c = c as usize;
            if self.n_true[c] > 0 {
                continue;
            }
            let open = self.clauses[c]
                .iter()
                .copied()
                .find(|l| self.value[l.var().index()].is_none());
            match open {
                None => {
                    self.pending.clear();
                    return false;
                }
                Some(lit) => {
                    if self.n_false[c] + 1 != self.clauses[c].len() as u32 {
                        continue;
                    }
                    self.stats.propagations += 1;
                    if !self.assign(lit) {
                        self.pending.clear();
                        return false;
                    }
                }
            }
        }
        true
    }

    fn next_unassigned(&mut self) -> Option<usize> {
        while self.cursor < self.value.len() && self.value[self.cursor].is_some() {
            self.cursor += 1;
        }
        (self.cursor < self.value.len()).then_some(self.cursor)
    }

    /// Undo to the most recent untried branch and take it. `false` once the
    /// search space is exhausted.
    fn backtrack(&mut self) -> bool {
        loop {
            self.stats.conflicts += 1;
            loop {
                let Some(level) = self.levels.pop() else {
                    return false;
                };
                self.unassign_to(level.trail_len);
                if level.flipped {
                    continue;
                }
                let alt = !level.lit;
                self.levels.push(Level {
                    trail_len: self.trail.len(),
                    lit: alt,
                    flipped: true,
                });
                self.stats.phase_deviations += 1;
                if self.assign(alt) && self.propagate() {
                    return true;
                }
                break;
            }
        }
    }

    fn run(&mut self, phases: &Assignment, deadline: Instant) -> SolveStatus {
        for (ci, c) in self.clauses.iter().enumerate() {
            if c.len() == 1 {
                self.pending.push(ci as u32);
            }
        }
        if !self.propagate() {
            return SolveStatus::Unsat;
        }
        let mut steps: u64 = 0;
        loop {
            steps += 1;
            if steps % 256 == 0 && Instant::now() >= deadline {
                return SolveStatus::Timeout;
            }
            let Some(v) = self.next_unassigned() else {
                let model: Vec<bool> = self.value.iter().map(|v| v.unwrap_or(false)).collect();
                return SolveStatus::Sat(Assignment::from_bools(&model));
            };
            let var = crate::cnf::Var::from_index(v);
            let lit = var.lit(phases.get(var).unwrap_or(false));
            self.stats.decisions += 1;
            self.levels.push(Level {
                trail_len: self.trail.len(),
                lit,
                flipped: false,
            });
            if !(self.assign(lit) && self.propagate()) && !self.backtrack() {
                return SolveStatus::Unsat;
            }
        }
    }
}

/// Solves `f` with `phases` as the first value tried for each variable.
pub fn mini_solve(f: &CnfFormula, phases: &Assignment, timeout: Duration) -> SolveOutcome {
    let start = Instant::now();
    let mut dpll = Dpll::new(f);
    let status = dpll.run(phases, start + timeout);
    SolveOutcome {
        status,
        runtime: start.elapsed().as_secs_f64(),
        stats: Some(dpll.stats),
    }
}

/// [`SolverAdapter`] over [`mini_solve`].
#[derive(Clone, Copy, Debug, Default)]
pub struct MiniSolver;

impl SolverAdapter for MiniSolver {
    fn name(&self) -> &str {
        "mini"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            phase_hints: true,
            stats: true,
        }
    }

    fn invoke(&self, f: &CnfFormula, phases: &Assignment, timeout: Duration) -> Result<SolveOutcome, SolverError> {
        Ok(mini_solve(f, phases, timeout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::count_unsat;
    use proptest::prelude::*;

    const T: Duration = Duration::from_secs(10);

    fn brute_sat(n: u32, clauses: &[Vec<i32>]) -> bool {
        (0u32..(1 << n)).any(|bits| {
            clauses.iter().all(|c| {
                c.iter().any(|&l| {
                    let b = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                    if l > 0 {
                        b
                    } else {
                        !b
                    }
                })
            })
        })
    }

    /// Pigeonhole: p pigeons, h holes; var (i, j) = i * h + j + 1.
    fn php(p: u32, h: u32) -> Vec<Vec<i32>> {
        let x = |i: u32, j: u32| (i * h + j + 1) as i32;
        let mut c: Vec<Vec<i32>> = (0..p).map(|i| (0..h).map(|j| x(i, j)).collect()).collect();
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    c.push(vec![-x(a, j), -x(b, j)]);
                }
            }
        }
        c
    }

    #[test]
    fn empty_formula_is_sat() {
        let f = CnfFormula::empty(0);
        assert!(matches!(mini_solve(&f, &Assignment::new(0), T).status, SolveStatus::Sat(_)));
    }

    #[test]
    fn pigeonhole_3_2_unsat() {
        let clauses = php(3, 2);
        assert!(!brute_sat(6, &clauses));
        let f = CnfFormula::from_dimacs_clauses(6, &clauses).unwrap();
        assert_eq!(mini_solve(&f, &Assignment::filled(6, false), T).status, SolveStatus::Unsat);
    }

    #[test]
    fn contradictory_units_unsat() {
        let f = CnfFormula::from_dimacs_clauses(1, &[vec![1], vec![-1]]).unwrap();
        for phase in [false, true] {
            assert_eq!(mini_solve(&f, &Assignment::filled(1, phase), T).status, SolveStatus::Unsat);
        }
    }

    #[test]
    fn model_phases_need_no_conflicts() {
        let f = CnfFormula::from_dimacs_clauses(3, &[vec![1, 2], vec![-1, 3], vec![-2, -3]]).unwrap();
        let model = Assignment::from_bools(&[true, false, true]);
        let out = mini_solve(&f, &model, T);
        let stats = out.stats.unwrap();
        assert_eq!(stats.conflicts, 0);
        assert_eq!(stats.phase_deviations, 0);
        assert_eq!(out.status, SolveStatus::Sat(model));
    }

    #[test]
    fn tautologies_and_duplicates_are_harmless() {
        let f = CnfFormula::from_dimacs_clauses(2, &[vec![1, -1], vec![2, 2], vec![-1, -1]]).unwrap();
        let out = mini_solve(&f, &Assignment::filled(2, true), T);
        assert_eq!(out.status, SolveStatus::Sat(Assignment::from_bools(&[false, true])));
    }

    fn arb_formula() -> impl Strategy<Value = (u32, Vec<Vec<i32>>, Vec<bool>)> {
        (1u32..=15).prop_flat_map(|n| {
            let lit = (1..=n as i32, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
            (
                Just(n),
                prop::collection::vec(prop::collection::vec(lit, 1..4), 0..(4 * n as usize + 2)),
                prop::collection::vec(any::<bool>(), n as usize),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn agrees_with_brute_force((n, clauses, phases) in arb_formula()) {
            let f = CnfFormula::from_dimacs_clauses(n, &clauses).unwrap();
            let out = mini_solve(&f, &Assignment::from_bools(&phases), T);
            match out.status {
                SolveStatus::Sat(m) => {
                    prop_assert!(brute_sat(n, &clauses));
                    prop_assert_eq!(count_unsat(&f, &m).unsat, 0);
                }
                SolveStatus::Unsat => prop_assert!(!brute_sat(n, &clauses)),
                SolveStatus::Timeout => prop_assert!(false, "timeout"),
            }
        }
    }
}
