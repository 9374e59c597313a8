use crate::cnf::{Assignment, CnfFormula, Var};

use super::{EncodeError, Graph, VarMap};

/// `x(v, c)` for every vertex and colour, an at-least-one-colour clause per
/// vertex and a conflict clause per edge and colour: `n + k·|E|` clauses.
/// At-most-one-colour clauses are omitted; decoding takes the lowest colour.
pub fn encode_coloring(g: &Graph, k: usize) -> Result<(CnfFormula, VarMap), EncodeError> {
    if k < 1 {
        return Err(EncodeError::InvalidBound("colour count must be at least 1".into()));
    }
    let n = g.n();
    let x = |v: usize, c: usize| Var::new(((v - 1) * k + c) as u32);
    let mut vm = VarMap::new();
    for v in 1..=n {
        for c in 1..=k {
            vm.insert("x", &[v as u32, c as u32], x(v, c));
        }
    }
    vm.set_meta("scheme", "coloring");
    vm.set_meta("n", n);
    vm.set_meta("k", k);

    let mut clauses = Vec::with_capacity(n + k * g.edges().len());
    for v in 1..=n {
        clauses.push((1..=k).map(|c| x(v, c).pos()).collect());
    }
    for &(u, v) in g.edges() {
        for c in 1..=k {
            clauses.push(vec![x(u, c).neg(), x(v, c).neg()]);
        }
    }
    Ok((CnfFormula::new((n * k) as u32, clauses)?, vm))
}

/// Vertex → colour (index 0 unused), lowest true colour per vertex.
pub fn decode_coloring(model: &Assignment, vm: &VarMap) -> Result<Vec<usize>, EncodeError> {
    let n = vm.meta_u64("n").ok_or_else(|| EncodeError::NotAModel("varmap lacks `n`".into()))? as usize;
    let k = vm.meta_u64("k").ok_or_else(|| EncodeError::NotAModel("varmap lacks `k`".into()))? as usize;
    let mut colors = vec![0; n + 1];
    for (v, slot) in colors.iter_mut().enumerate().skip(1) {
        *slot = (1..=k)
            .find(|&c| {
                vm.get("x", &[v as u32, c as u32])
                    .and_then(|var| model.get(var))
                    .unwrap_or(false)
            })
            .ok_or_else(|| EncodeError::NotAModel(format!("vertex {v} has no colour")))?;
    }
    Ok(colors)
}

pub fn is_proper_coloring(g: &Graph, colors: &[usize]) -> bool {
    g.edges().iter().all(|&(u, v)| colors[u] != colors[v])
}
