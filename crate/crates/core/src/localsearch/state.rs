//! Total assignment with per-clause true-literal counters and an indexed
//! set of unsatisfied clauses.

use crate::cnf::{Assignment, CnfFormula, FlipScore, Var};

const ABSENT: u32 = u32::MAX;

pub struct SearchState<'f> {
    f: &'f CnfFormula,
    values: Vec<bool>,
    true_count: Vec<u32>,
    unsat: Vec<u32>,
    unsat_pos: Vec<u32>,
}

impl<'f> SearchState<'f> {
    /// Unassigned variables of `init` start false.
    pub fn new(f: &'f CnfFormula, init: &Assignment) -> Self {
        let n = f.num_vars() as usize;
        let values: Vec<bool> = (0..n).map(|i| init.get(Var::from_index(i)).unwrap_or(false)).collect();
        let mut st = SearchState {
            f,
            values,
            true_count: vec![0; f.num_clauses()],
            unsat: Vec::new(),
            unsat_pos: vec![ABSENT; f.num_clauses()],
        };
        st.recount();
        st
    }

    fn recount(&mut self) {
        self.unsat.clear();
        for (ci, clause) in self.f.clauses().enumerate() {
            let t = clause.iter().filter(|l| l.eval(self.values[l.var().index()])).count() as u32;
            self.true_count[ci] = t;
            self.unsat_pos[ci] = ABSENT;
            if t == 0 {
                self.unsat_pos[ci] = self.unsat.len() as u32;
                self.unsat.push(ci as u32);
            }
        }
    }

    pub fn formula(&self) -> &'f CnfFormula {
        self.f
    }

    pub fn value(&self, v: Var) -> bool {
        self.values[v.index()]
    }

    pub fn num_unsat(&self) -> usize {
        self.unsat.len()
    }

    /// Indices of the currently unsatisfied clauses, in no fixed order.
    pub fn unsat(&self) -> &[u32] {
        &self.unsat
    }

    pub fn is_unsat(&self, clause: usize) -> bool {
        self.unsat_pos[clause] != ABSENT
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::from_bools(&self.values)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Replaces every value and rebuilds the counters.
    pub fn reset(&mut self, values: &[bool]) {
        self.values.copy_from_slice(values);
        self.recount();
    }

    fn delta(&self, v: Var, pos: u16, neg: u16) -> i64 {
        if self.values[v.index()] {
            neg as i64 - pos as i64
        } else {
            pos as i64 - neg as i64
        }
    }

    pub fn score(&self, v: Var) -> FlipScore {
        let mut make = 0;
        let mut brk = 0;
        for occ in self.f.occurrences(v) {
            let old = self.true_count[occ.clause as usize] as i64;
            let new = old + self.delta(v, occ.pos, occ.neg);
            if old == 0 && new > 0 {
                make += 1;
            } else if old > 0 && new == 0 {
                brk += 1;
            }
        }
        FlipScore::new(make, brk)
    }

    pub fn flip(&mut self, v: Var) {
        for occ in self.f.occurrences(v) {
            let c = occ.clause as usize;
            let old = self.true_count[c];
            let new = (old as i64 + self.delta(v, occ.pos, occ.neg)) as u32;
            self.true_count[c] = new;
            if old == 0 && new > 0 {
                let at = self.unsat_pos[c] as usize;
                let last = *self.unsat.last().expect("clause was unsat");
                self.unsat.swap_remove(at);
                if last as usize != c {
                    self.unsat_pos[last as usize] = at as u32;
                }
                self.unsat_pos[c] = ABSENT;
            } else if old > 0 && new == 0 {
                self.unsat_pos[c] = self.unsat.len() as u32;
                self.unsat.push(c as u32);
            }
        }
        self.values[v.index()] = !self.values[v.index()];
    }
}
