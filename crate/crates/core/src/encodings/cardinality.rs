//! Sequential-counter at-most-k constraints.

use crate::cnf::{Lit, Var};

use super::EncodeError;

/// Clauses and auxiliary variables of one at-most-k constraint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtMostK {
    pub clauses: Vec<Vec<Lit>>,
    /// `(index tuple, var)` for the `aux` family; the tuple is
    /// `(constraint id, i, j)` where `s(i, j)` means "at least j of the
    /// first i literals are true".
    pub aux: Vec<(Vec<u32>, Var)>,
    /// First variable not used by this constraint.
    pub next_free_var: u32,
}

/// At most `k` of `lits` are true. Auxiliary variables are allocated from
/// `next_free_var` upward and tagged with `constraint_id`.
pub fn encode_atmost_k(lits: &[Lit], k: usize, next_free_var: u32, constraint_id: u32) -> Result<AtMostK, EncodeError> {
    let n = lits.len();
    if k > n {
        return Err(EncodeError::InvalidBound(format!("at-most-{k} over {n} literals")));
    }
    let mut out = AtMostK {
        next_free_var,
        ..AtMostK::default()
    };
    if k == n {
        return Ok(out);
    }
    if k == 0 {
        out.clauses.extend(lits.iter().map(|&l| vec![!l]));
        return Ok(out);
    }

    // s[i][j]: register for prefix i+1 (0-based i in 0..n-1), count j+1.
    let mut s = vec![vec![Var::new(1); k]; n - 1];
    let mut next = next_free_var;
    for (i, row) in s.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = Var::new(next);
            out.aux.push((vec![constraint_id, i as u32 + 1, j as u32 + 1], *slot));
            next += 1;
        }
    }
    out.next_free_var = next;

    let c = &mut out.clauses;
    c.push(vec![!lits[0], s[0][0].pos()]);
    for j in 1..k {
        c.push(vec![s[0][j].neg()]);
    }
    for i in 1..n - 1 {
        c.push(vec![!lits[i], s[i][0].pos()]);
        c.push(vec![s[i - 1][0].neg(), s[i][0].pos()]);
        for j in 1..k {
            c.push(vec![!lits[i], s[i - 1][j - 1].neg(), s[i][j].pos()]);
            c.push(vec![s[i - 1][j].neg(), s[i][j].pos()]);
        }
        c.push(vec![!lits[i], s[i - 1][k - 1].neg()]);
    }
    c.push(vec![!lits[n - 1], s[n - 2][k - 1].neg()]);
    Ok(out)
}
