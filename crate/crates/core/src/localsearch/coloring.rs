//! Min-conflicts search directly on the graph; the colouring is converted to
//! `x(v, c)` values only on return.

use std::time::{Duration, Instant};

use crate::cnf::Assignment;
use crate::encodings::{Graph, VarMap};

use super::{Rng, SearchOutcome, SearchParams};

/// Vertices in decreasing degree (ties by id); each takes the colour with
/// the fewest clashes against already coloured neighbours (ties: lowest).
/// Index 0 is unused.
pub fn greedy_coloring(g: &Graph, k: usize) -> Vec<usize> {
    let adj = g.adjacency();
    let mut order: Vec<usize> = (1..=g.n()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(adj[v].len()), v));
    let mut color = vec![0usize; g.n() + 1];
    let mut clashes = vec![0usize; k + 1];
    for v in order {
        clashes.iter_mut().for_each(|c| *c = 0);
        for &u in &adj[v] {
            clashes[color[u]] += 1;
        }
        color[v] = (1..=k).min_by_key(|&c| (clashes[c], c)).unwrap_or(1);
    }
    color
}

fn to_assignment(colors: &[usize], k: usize, vm: &VarMap, num_vars: u32) -> Assignment {
    let mut a = Assignment::filled(num_vars, false);
    for (v, &col) in colors.iter().enumerate().skip(1) {
        for c in 1..=k {
            if let Some(var) = vm.get("x", &[v as u32, c as u32]) {
                a.set(var, c == col);
            }
        }
    }
    a
}

fn num_vars(vm: &VarMap) -> u32 {
    vm.family("x").map_or(0, |f| f.vars().map(|v| v.id()).max().unwrap_or(0))
}

/// The greedy colouring as an assignment to the colouring encoding.
pub fn coloring_greedy_init(g: &Graph, k: usize, vm: &VarMap) -> Assignment {
    to_assignment(&greedy_coloring(g, k), k, vm, num_vars(vm))
}

fn monochromatic(g: &Graph, color: &[usize]) -> usize {
    g.edges().iter().filter(|&&(u, v)| color[u] == color[v]).count()
}

/// `flips` counts recolouring moves; `best_unsat` is the number of
/// monochromatic edges of the best colouring, which equals the number of
/// violated clauses of its converted assignment.
pub fn coloring_native_search(g: &Graph, k: usize, vm: &VarMap, p: &SearchParams) -> SearchOutcome {
    let start = Instant::now();
    let limit = Duration::from_secs_f64(p.soft_timeout.max(0.0));
    let k = k.max(1);
    let mut rng = Rng::new(p.seed);
    let adj = g.adjacency();
    let mut color = greedy_coloring(g, k);
    let mut conflicts = monochromatic(g, &color);
    let mut best = color.clone();
    let mut best_conflicts = conflicts;
    let mut moves = 0u64;
    // (vertex, colour) pairs forbidden until the given move number.
    let mut tabu = vec![0u64; (g.n() + 1) * (k + 1)];
    let mut clashing = Vec::new();
    let mut counts = vec![0usize; k + 1];
    let mut options = Vec::new();

    while best_conflicts > 0 && k > 1 {
        if p.max_flips.is_some_and(|m| moves >= m) || start.elapsed() >= limit {
            break;
        }
        clashing.clear();
        for &(u, v) in g.edges() {
            if color[u] == color[v] {
                clashing.push(u);
                clashing.push(v);
            }
        }
        clashing.sort_unstable();
        clashing.dedup();
        let v = *rng.pick(&clashing);
        counts.iter_mut().for_each(|c| *c = 0);
        for &u in &adj[v] {
            counts[color[u]] += 1;
        }
        options.clear();
        let mut best_count = usize::MAX;
        for c in (1..=k).filter(|&c| c != color[v]) {
            let allowed = tabu[v * (k + 1) + c] <= moves || conflicts - counts[color[v]] + counts[c] < best_conflicts;
            if !allowed {
                continue;
            }
            if counts[c] < best_count {
                best_count = counts[c];
                options.clear();
            }
            if counts[c] == best_count {
                options.push(c);
            }
        }
        if options.is_empty() {
            options.extend((1..=k).filter(|&c| c != color[v]));
        }
        let c = *rng.pick(&options);
        tabu[v * (k + 1) + color[v]] = moves + 1 + p.tabu_tenure as u64;
        conflicts = conflicts - counts[color[v]] + counts[c];
        color[v] = c;
        moves += 1;
        if conflicts < best_conflicts {
            best_conflicts = conflicts;
            best.clone_from(&color);
        }
    }
    SearchOutcome {
        assignment: to_assignment(&best, k, vm, num_vars(vm)),
        flips: moves,
        best_unsat: best_conflicts,
        elapsed: start.elapsed().as_secs_f64(),
        found_model: best_conflicts == 0,
    }
}
