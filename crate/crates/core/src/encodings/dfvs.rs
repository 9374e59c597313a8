use crate::cnf::{Assignment, CnfFormula, Var};

use super::{encode_atmost_k, ClauseSink, Digraph, EncodeError, VarMap, AUX_FAMILY};

/// Reachability encoding of "at most `k` deletions leave `g` acyclic".
///
/// `del(v)` is true iff `v` is deleted. `r(u, v)` (u ≠ v) over-approximates
/// reachability in the residual graph: every surviving arc implies `r`,
/// `r` is transitive, and no surviving arc `(u, v)` may have `r(v, u)`.
pub fn encode_dfvs(g: &Digraph, k: i64) -> Result<(CnfFormula, VarMap), EncodeError> {
    if k < 0 {
        return Err(EncodeError::InvalidBound(format!("deletion budget {k} is negative")));
    }
    let n = g.n();
    let mut sink = ClauseSink::new();
    let mut vm = VarMap::new();

    let del: Vec<Var> = (1..=n)
        .map(|v| {
            let var = sink.fresh();
            vm.insert("del", &[v as u32], var);
            var
        })
        .collect();
    // reach[u][v], vertex indices 0-based; diagonal unused.
    let mut reach = vec![vec![None; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u != v {
                let var = sink.fresh();
                vm.insert("r", &[u as u32 + 1, v as u32 + 1], var);
                reach[u][v] = Some(var);
            }
        }
    }
    let r = |u: usize, v: usize| reach[u][v].expect("off-diagonal");

    for &(u, v) in g.arcs() {
        let (u, v) = (u - 1, v - 1);
        sink.add(vec![del[u].pos(), del[v].pos(), r(u, v).pos()]);
        sink.add(vec![del[u].pos(), del[v].pos(), r(v, u).neg()]);
    }
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            for w in 0..n {
                if w == u || w == v {
                    continue;
                }
                sink.add(vec![r(u, v).neg(), r(v, w).neg(), r(u, w).pos()]);
            }
        }
    }

    let budget = (k as usize).min(n);
    let del_lits: Vec<_> = del.iter().map(|v| v.pos()).collect();
    let card = encode_atmost_k(&del_lits, budget, sink.next_var(), 0)?;
    for (idx, var) in &card.aux {
        vm.insert(AUX_FAMILY, idx, *var);
    }
    sink.set_next_var(card.next_free_var);
    sink.extend(card.clauses);

    vm.set_meta("scheme", "dfvs");
    vm.set_meta("n", n);
    vm.set_meta("k", k);
    vm.set_meta("polarity", "del(v) = true means v is deleted");
    Ok((sink.finish()?, vm))
}

/// Deleted vertices, ascending.
pub fn decode_dfvs(model: &Assignment, vm: &VarMap) -> Result<Vec<usize>, EncodeError> {
    let fam = vm
        .family("del")
        .ok_or_else(|| EncodeError::NotAModel("varmap lacks the `del` family".into()))?;
    let mut out: Vec<usize> = fam
        .entries()
        .iter()
        .filter(|(_, var)| model.get(*var).unwrap_or(false))
        .map(|(idx, _)| idx[0] as usize)
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// True iff `g` minus `removed` has no directed cycle.
pub fn is_acyclic_without(g: &Digraph, removed: &[usize]) -> bool {
    let n = g.n();
    let mut gone = vec![false; n + 1];
    for &v in removed {
        if v <= n {
            gone[v] = true;
        }
    }
    // Kahn's algorithm on the residual graph.
    let mut indeg = vec![0usize; n + 1];
    let succ = g.successors();
    for &(u, v) in g.arcs() {
        if !gone[u] && !gone[v] {
            indeg[v] += 1;
        }
    }
    let mut stack: Vec<usize> = (1..=n).filter(|&v| !gone[v] && indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = stack.pop() {
        seen += 1;
        for &v in &succ[u] {
            if gone[v] {
                continue;
            }
            indeg[v] -= 1;
            if indeg[v] == 0 {
                stack.push(v);
            }
        }
    }
    seen == (1..=n).filter(|&v| !gone[v]).count()
}
