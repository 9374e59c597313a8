//! CNF formulas, assignments and the clause-level evaluation primitives every
//! other module is built on.

mod dimacs;
mod eval;

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

pub use dimacs::{parse_dimacs, parse_literal_stream, write_dimacs, write_literals};
pub use eval::{
    clause_status, complete_assignment, conflict_score, count_unsat, unit_propagate, ClauseStatus,
    Propagation,
    UnsatCount,
};

/// A propositional variable, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    /// Panics on 0; variables are 1-based.
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "variable ids are 1-based");
        Var(id)
    }

    pub fn id(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing dense per-variable arrays.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(idx: usize) -> Self {
        Var(idx as u32 + 1)
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }

    pub fn neg(self) -> Lit {
        Lit(-(self.0 as i32))
    }

    pub fn lit(self, polarity: bool) -> Lit {
        if polarity {
            self.pos()
        } else {
            self.neg()
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A literal in DIMACS form: a nonzero signed integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn from_dimacs(value: i32) -> Option<Self> {
        (value != 0 && value != i32::MIN).then_some(Lit(value))
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    /// `true` for a positive literal.
    pub fn polarity(self) -> bool {
        self.0 > 0
    }

    /// Truth value of the literal when its variable has value `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.polarity()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("literal {lit} in clause {clause} exceeds the declared {num_vars} variables")]
    VarOutOfRange { clause: usize, lit: i32, num_vars: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One occurrence of a variable in a clause, with how many literals of each
/// sign it contributes (clauses may repeat literals or be tautological).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub clause: u32,
    pub pos: u16,
    pub neg: u16,
}

/// An immutable clause database.
///
/// Literals are stored flat; `starts[i]..starts[i + 1]` delimits clause `i`.
/// The per-variable occurrence index is built on first use.
pub struct CnfFormula {
    num_vars: u32,
    lits: Vec<Lit>,
    starts: Vec<usize>,
    occurrences: OnceLock<Vec<Vec<Occurrence>>>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Vec<Lit>>) -> Result<Self, CnfError> {
        let mut f = CnfFormula::empty(num_vars);
        for clause in clauses {
            f.push_clause(&clause)?;
        }
        Ok(f)
    }

    /// Convenience constructor from DIMACS integers.
    pub fn from_dimacs_clauses(num_vars: u32, clauses: &[Vec<i32>]) -> Result<Self, CnfError> {
        let mut f = CnfFormula::empty(num_vars);
        for (i, clause) in clauses.iter().enumerate() {
            let lits = clause
                .iter()
                .map(|&l| {
                    Lit::from_dimacs(l).ok_or(CnfError::VarOutOfRange {
                        clause: i,
                        lit: l,
                        num_vars,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            f.push_clause(&lits)?;
        }
        Ok(f)
    }

    pub fn empty(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            lits: Vec::new(),
            starts: vec![0],
            occurrences: OnceLock::new(),
        }
    }

    pub(crate) fn push_clause(&mut self, clause: &[Lit]) -> Result<(), CnfError> {
        let idx = self.num_clauses();
        if clause.is_empty() {
            return Err(CnfError::EmptyClause(idx));
        }
        if let Some(bad) = clause.iter().find(|l| l.var().id() > self.num_vars) {
            return Err(CnfError::VarOutOfRange {
                clause: idx,
                lit: bad.to_dimacs(),
                num_vars: self.num_vars,
            });
        }
        self.lits.extend_from_slice(clause);
        self.starts.push(self.lits.len());
        self.occurrences = OnceLock::new();
        Ok(())
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn num_literals(&self) -> usize {
        self.lits.len()
    }

    pub fn clause(&self, idx: usize) -> &[Lit] {
        &self.lits[self.starts[idx]..self.starts[idx + 1]]
    }

    pub fn clauses(&self) -> impl ExactSizeIterator<Item = &[Lit]> + '_ {
        (0..self.num_clauses()).map(move |i| self.clause(i))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.num_vars).map(Var)
    }

    /// Clauses containing `v`, deduplicated, with per-sign literal counts.
    pub fn occurrences(&self, v: Var) -> &[Occurrence] {
        let occ = self.occurrences.get_or_init(|| self.build_occurrences());
        occ.get(v.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    fn build_occurrences(&self) -> Vec<Vec<Occurrence>> {
        let mut occ: Vec<Vec<Occurrence>> = vec![Vec::new(); self.num_vars as usize];
        for (ci, clause) in self.clauses().enumerate() {
            for &lit in clause {
                let list = &mut occ[lit.var().index()];
                let entry = match list.last_mut() {
                    Some(o) if o.clause == ci as u32 => o,
                    _ => {
                        list.push(Occurrence {
                            clause: ci as u32,
                            pos: 0,
                            neg: 0,
                        });
                        list.last_mut().unwrap()
                    }
                };
                if lit.polarity() {
                    entry.pos += 1;
                } else {
                    entry.neg += 1;
                }
            }
        }
        occ
    }

    /// Clause list as DIMACS integers, mostly for tests and serialisation.
    pub fn to_dimacs_clauses(&self) -> Vec<Vec<i32>> {
        self.clauses()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }
}

impl Clone for CnfFormula {
    fn clone(&self) -> Self {
        CnfFormula {
            num_vars: self.num_vars,
            lits: self.lits.clone(),
            starts: self.starts.clone(),
            occurrences: OnceLock::new(),
        }
    }
}

impl PartialEq for CnfFormula {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.lits == other.lits && self.starts == other.starts
    }
}

impl Eq for CnfFormula {}

impl fmt::Debug for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CnfFormula")
            .field("num_vars", &self.num_vars)
            .field("clauses", &self.to_dimacs_clauses())
            .finish()
    }
}

/// A possibly partial truth assignment over variables `1..=len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    /// All variables unassigned.
    pub fn new(num_vars: u32) -> Self {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    pub fn filled(num_vars: u32, value: bool) -> Self {
        Assignment {
            values: vec![Some(value); num_vars as usize],
        }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Assignment {
            values: values.iter().map(|&b| Some(b)).collect(),
        }
    }

    /// Builds an assignment from signed literals. Later literals override
    /// earlier ones; callers that must reject duplicates check beforehand.
    pub fn from_literals(num_vars: u32, lits: impl IntoIterator<Item = Lit>) -> Self {
        let mut a = Assignment::new(num_vars);
        for lit in lits {
            a.set(lit.var(), lit.polarity());
        }
        a
    }

    pub fn len(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<bool> {
        self.values.get(v.index()).copied().flatten()
    }

    /// Grows the assignment when `v` is beyond its current length.
    pub fn set(&mut self, v: Var, value: bool) {
        if v.index() >= self.values.len() {
            self.values.resize(v.index() + 1, None);
        }
        self.values[v.index()] = Some(value);
    }

    /// Extends with unassigned variables up to `num_vars`.
    pub fn ensure_len(&mut self, num_vars: u32) {
        if self.values.len() < num_vars as usize {
            self.values.resize(num_vars as usize, None);
        }
    }

    pub fn unset(&mut self, v: Var) {
        if let Some(slot) = self.values.get_mut(v.index()) {
            *slot = None;
        }
    }

    pub fn flip(&mut self, v: Var) {
        if let Some(Some(b)) = self.values.get_mut(v.index()) {
            *b = !*b;
        }
    }

    /// Value of a literal, `None` when its variable is unassigned.
    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.get(lit.var()).map(|b| lit.eval(b))
    }

    pub fn num_assigned(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Every variable in `1..=num_vars` has a value.
    pub fn is_total_over(&self, num_vars: u32) -> bool {
        (num_vars as usize) <= self.values.len()
            && self.values[..num_vars as usize].iter().all(Option::is_some)
    }

    pub fn assigned(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (Var::from_index(i), b)))
    }

    pub fn to_literals(&self) -> Vec<Lit> {
        self.assigned().map(|(v, b)| v.lit(b)).collect()
    }

    /// Dense values with unassigned variables reported as `default`.
    pub fn to_bools(&self, default: bool) -> Vec<bool> {
        self.values.iter().map(|v| v.unwrap_or(default)).collect()
    }

    /// Number of variables on which two assignments disagree (unassigned
    /// counts as a disagreement with any value).
    pub fn hamming(&self, other: &Assignment) -> usize {
        let n = self.values.len().max(other.values.len());
        (0..n)
            .filter(|&i| self.values.get(i).copied().flatten() != other.values.get(i).copied().flatten())
            .count()
    }
}

/// Effect of flipping one variable: `make` clauses become satisfied,
/// `brk` clauses become unsatisfied, `score = make - brk`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlipScore {
    pub make: u32,
    pub brk: u32,
    pub score: i64,
}

impl FlipScore {
    pub fn new(make: u32, brk: u32) -> Self {
        FlipScore {
            make,
            brk,
            score: make as i64 - brk as i64,
        }
    }
}
