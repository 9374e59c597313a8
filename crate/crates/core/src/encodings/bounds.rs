//! Upper-bound heuristics used when an instance comes without a bound.

use super::{is_acyclic_without, Dataset, Digraph, Graph};

/// DSATUR colouring (index 0 unused, colours from 1). Ties on saturation
/// break by degree, then by lowest vertex id.
pub fn dsatur_coloring(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let adj = g.adjacency();
    let mut color = vec![0usize; n + 1];
    // neighbour colours seen per vertex, as a sorted set
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for _ in 0..n {
        let v = (1..=n)
            .filter(|&v| color[v] == 0)
            .max_by(|&a, &b| {
                (seen[a].len(), adj[a].len(), std::cmp::Reverse(a)).cmp(&(seen[b].len(), adj[b].len(), std::cmp::Reverse(b)))
            })
            .expect("uncoloured vertex remains");
        let c = (1..).find(|c| seen[v].binary_search(c).is_err()).expect("free colour");
        color[v] = c;
        for &u in &adj[v] {
            if let Err(pos) = seen[u].binary_search(&c) {
                seen[u].insert(pos, c);
            }
        }
    }
    color
}

/// Number of colours DSATUR uses; at least 1.
pub fn dsatur_upper_bound(g: &Graph) -> usize {
    dsatur_coloring(g).into_iter().max().unwrap_or(0).max(1)
}

/// Strongly connected component id per vertex (index 0 unused).
fn scc_ids(n: usize, arcs: &[(usize, usize)], gone: &[bool]) -> Vec<usize> {
    let mut succ = vec![Vec::new(); n + 1];
    let mut pred = vec![Vec::new(); n + 1];
    for &(u, v) in arcs {
        if !gone[u] && !gone[v] {
            succ[u].push(v);
            pred[v].push(u);
        }
    }
    // Kosaraju, iterative.
    let mut visited = vec![false; n + 1];
    let mut order = Vec::with_capacity(n);
    for s in 1..=n {
        if gone[s] || visited[s] {
            continue;
        }
        visited[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((u, i)) = stack.pop() {
            if i < succ[u].len() {
                stack.push((u, i + 1));
                let w = succ[u][i];
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(u);
            }
        }
    }
    let mut comp = vec![usize::MAX; n + 1];
    let mut next = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &w in &pred[u] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Repeatedly deletes a vertex of maximum residual degree among vertices
/// lying on a cycle until the graph is acyclic.
pub fn greedy_fvs(g: &Digraph) -> Vec<usize> {
    let n = g.n();
    let mut gone = vec![false; n + 1];
    let mut removed = Vec::new();
    while !is_acyclic_without(g, &removed) {
        let comp = scc_ids(n, g.arcs(), &gone);
        let mut size = vec![0usize; n + 1];
        for v in 1..=n {
            if !gone[v] {
                size[comp[v]] += 1;
            }
        }
        let mut degree = vec![0usize; n + 1];
        for &(u, v) in g.arcs() {
            if !gone[u] && !gone[v] && comp[u] == comp[v] {
                degree[u] += 1;
                degree[v] += 1;
            }
        }
        let pick = (1..=n)
            .filter(|&v| !gone[v] && size[comp[v]] >= 2)
            .max_by_key(|&v| (degree[v], std::cmp::Reverse(v)))
            .expect("a cyclic graph has a non-trivial component");
        gone[pick] = true;
        removed.push(pick);
    }
    removed.sort_unstable();
    removed
}

pub fn greedy_fvs_upper_bound(g: &Digraph) -> usize {
    greedy_fvs(g).len()
}

/// Depth of a greedily grown exact tree (Gini splits, grown until every leaf
/// is pure); at least 1. Always a valid bound for the tree encoding.
pub fn greedy_tree_depth(data: &Dataset) -> usize {
    fn gini(labels: &[usize], rows: &[usize], classes: usize) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let mut counts = vec![0usize; classes];
        for &r in rows {
            counts[labels[r]] += 1;
        }
        let n = rows.len() as f64;
        1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
    }

    fn grow(data: &Dataset, rows: &[usize]) -> usize {
        let labels = data.labels();
        if rows.iter().all(|&r| labels[r] == labels[rows[0]]) {
            return 0;
        }
        let classes = data.num_classes();
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        for f in 0..data.feature_count() {
            let mut vals: Vec<f64> = rows.iter().map(|&r| data.value(r, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| data.value(r, f) <= thr);
                let score = left.len() as f64 * gini(labels, &left, classes) + right.len() as f64 * gini(labels, &right, classes);
                if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                    best = Some((score, left, right));
                }
            }
        }
        // Distinct rows with different labels always differ in some feature.
        let (_, left, right) = best.expect("impure node has a separating split");
        1 + grow(data, &left).max(grow(data, &right))
    }

    if data.is_empty() {
        return 1;
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    grow(data, &rows).max(1)
}
