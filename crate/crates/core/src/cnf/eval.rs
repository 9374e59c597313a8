use super::{Assignment, CnfFormula, FlipScore, Lit, Var};

/// Three-valued clause status under a partial assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClauseStatus {
    Sat,
    Unsat,
    Undetermined,
}

pub fn clause_status(clause: &[Lit], a: &Assignment) -> ClauseStatus {
    let mut open = false;
    for &lit in clause {
        match a.lit_value(lit) {
            Some(true) => return ClauseStatus::Sat,
            Some(false) => {}
            None => open = true,
        }
    }
    if open {
        ClauseStatus::Undetermined
    } else {
        ClauseStatus::Unsat
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnsatCount {
    /// Clauses with every literal falsified.
    pub unsat: usize,
    /// Clauses with no satisfied literal and at least one unassigned one.
    pub undetermined: usize,
}

pub fn count_unsat(f: &CnfFormula, a: &Assignment) -> UnsatCount {
    let mut count = UnsatCount::default();
    for clause in f.clauses() {
        match clause_status(clause, a) {
            ClauseStatus::Sat => {}
            ClauseStatus::Unsat => count.unsat += 1,
            ClauseStatus::Undetermined => count.undetermined += 1,
        }
    }
    count
}

/// Make/break counts for flipping `v` under the total assignment `a`.
///
/// Only the clauses containing `v` are inspected. Unassigned variables other
/// than `v` are treated as false.
pub fn conflict_score(f: &CnfFormula, a: &Assignment, v: Var) -> FlipScore {
    let Some(current) = a.get(v) else {
        return FlipScore::default();
    };
    let mut make = 0;
    let mut brk = 0;
    for occ in f.occurrences(v) {
        let clause = f.clause(occ.clause as usize);
        let others_true = clause
            .iter()
            .filter(|l| l.var() != v)
            .any(|&l| a.lit_value(l) == Some(true));
        if others_true {
            continue;
        }
        // Literals of `v` that are true now, and after the flip.
        let (now, after) = if current {
            (occ.pos, occ.neg)
        } else {
            (occ.neg, occ.pos)
        };
        match (now > 0, after > 0) {
            (false, true) => make += 1,
            (true, false) => brk += 1,
            _ => {}
        }
    }
    FlipScore::new(make, brk)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Propagation {
    Extended(Assignment),
    Conflict,
}

/// Unit propagation to fixpoint. Never retracts a value of `a`.
pub fn unit_propagate(f: &CnfFormula, a: &Assignment) -> Propagation {
    let mut a = a.clone();
    a.ensure_len(f.num_vars());
    loop {
        let mut changed = false;
        for clause in f.clauses() {
            let mut unit: Option<Lit> = None;
            let mut open = 0;
            let mut sat = false;
            for &lit in clause {
                match a.lit_value(lit) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        if unit != Some(lit) {
                            open += 1;
                        }
                        unit = Some(lit);
                    }
                }
            }
            if sat {
                continue;
            }
            match open {
                0 => return Propagation::Conflict,
                1 => {
                    let lit = unit.expect("one open literal");
                    a.set(lit.var(), lit.polarity());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Propagation::Extended(a);
        }
    }
}

/// Fills every unassigned variable in `1..=num_vars` with `default`.
pub fn complete_assignment(f: &CnfFormula, a: &Assignment, default: bool) -> Assignment {
    let mut out = Assignment::new(f.num_vars().max(a.len()));
    for v in f.vars() {
        out.set(v, a.get(v).unwrap_or(default));
    }
    for (v, b) in a.assigned() {
        out.set(v, b);
    }
    out
}
