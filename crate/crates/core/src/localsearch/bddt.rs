//! Level-by-level search on the tree encoding.

use crate::cnf::{Assignment, CnfFormula, Var};
use crate::encodings::{Dataset, DecisionTree, TreeNode, VarMap, PASS_THROUGH};

use super::{Budget, Rng, SearchOutcome, SearchParams, SearchState};

/// Random feature per node with the middle cut of that feature's values
/// (pass-through when the feature is constant); leaves take the majority
/// label of the rows reaching them, class 0 when empty.
pub fn bddt_initial_tree(data: &Dataset, depth: usize, rng: &mut Rng) -> DecisionTree {
    let internal = (1usize << depth) - 1;
    let nodes: Vec<TreeNode> = (0..internal)
        .map(|_| {
            let feature = rng.below(data.feature_count().max(1));
            let cuts = data.cuts(feature);
            let threshold = cuts.get(cuts.len() / 2).copied().unwrap_or(PASS_THROUGH);
            TreeNode { feature, threshold }
        })
        .collect();
    let mut tree = DecisionTree {
        depth,
        nodes,
        leaves: vec![0; 1 << depth],
    };
    let classes = data.num_classes().max(1);
    let mut votes = vec![vec![0usize; classes]; 1 << depth];
    for (row, &label) in data.rows().iter().zip(data.labels()) {
        votes[leaf_of(&tree, row)][label] += 1;
    }
    for (leaf, v) in tree.leaves.iter_mut().zip(&votes) {
        *leaf = (0..classes).max_by_key(|&c| (v[c], std::cmp::Reverse(c))).unwrap_or(0);
    }
    tree
}

fn leaf_of(tree: &DecisionTree, row: &[f64]) -> usize {
    let internal = tree.nodes.len();
    let mut t = 1;
    while t <= internal {
        let node = &tree.nodes[t - 1];
        t = if row[node.feature] <= node.threshold { 2 * t } else { 2 * t + 1 };
    }
    t - internal - 1
}

/// Sets every a/s/c variable from `tree` and each `d(r, t)` to the value
/// propagation through the threshold clauses would force.
fn tree_assignment(tree: &DecisionTree, data: &Dataset, vm: &VarMap, num_vars: u32) -> Assignment {
    let mut a = Assignment::filled(num_vars, false);
    let cut_index = |f: usize, thr: f64| {
        let cuts = data.cuts(f);
        cuts.iter().position(|&c| c == thr).unwrap_or(cuts.len())
    };
    for (i, node) in tree.nodes.iter().enumerate() {
        let t = i as u32 + 1;
        let f = node.feature as u32 + 1;
        if let Some(v) = vm.get("a", &[t, f]) {
            a.set(v, true);
        }
        let j = cut_index(node.feature, node.threshold) as u32 + 1;
        if let Some(v) = vm.get("s", &[t, f, j]) {
            a.set(v, true);
        }
        for (r, row) in data.rows().iter().enumerate() {
            if let Some(v) = vm.get("d", &[r as u32 + 1, t]) {
                a.set(v, row[node.feature] <= node.threshold);
            }
        }
    }
    for (l, &class) in tree.leaves.iter().enumerate() {
        if let Some(v) = vm.get("c", &[l as u32 + 1, class as u32]) {
            a.set(v, true);
        }
    }
    a
}

fn level_of_node(t: u32) -> usize {
    (u32::BITS - 1 - t.leading_zeros()) as usize
}

fn var_levels(vm: &VarMap, num_vars: u32, depth: usize) -> Vec<Option<usize>> {
    let mut levels = vec![None; num_vars as usize];
    let mut mark = |family: &str, node_pos: Option<usize>| {
        if let Some(fam) = vm.family(family) {
            for (idx, var) in fam.entries() {
                if let Some(slot) = levels.get_mut(var.index()) {
                    *slot = Some(node_pos.map_or(depth - 1, |p| level_of_node(idx[p])));
                }
            }
        }
    };
    mark("a", Some(0));
    mark("s", Some(0));
    mark("d", Some(1));
    mark("c", None);
    levels
}

/// Level-by-level search. The depth is read from the map's metadata. Each
/// step takes a random unsatisfied clause touching the current level and
/// flips the best-scoring current-level variable in it, or with probability
/// `noise` a random one. After `stagnation_window` non-improving steps the
/// search moves one level down, wrapping back to the root.
pub fn bddt_level_search(f: &CnfFormula, data: &Dataset, vm: &VarMap, p: &SearchParams) -> SearchOutcome {
    let depth = vm.meta_u64("depth").unwrap_or(1).max(1) as usize;
    let mut rng = Rng::new(p.seed);
    let tree = bddt_initial_tree(data, depth, &mut rng);
    let init = tree_assignment(&tree, data, vm, f.num_vars());
    let levels = var_levels(vm, f.num_vars(), depth);
    let mut st = SearchState::new(f, &init);
    let mut budget = Budget::new(p, &st);
    let mut level = 0;
    let mut stale = 0u64;
    let mut empty_levels = 0;
    let mut touching: Vec<u32> = Vec::new();
    let mut ties: Vec<Var> = Vec::new();
    let on_level = |v: Var, level: usize| levels.get(v.index()).copied().flatten() == Some(level);

    while st.num_unsat() > 0 && !budget.exhausted() {
        touching.clear();
        touching.extend(
            st.unsat()
                .iter()
                .copied()
                .filter(|&c| f.clause(c as usize).iter().any(|l| on_level(l.var(), level))),
        );
        if touching.is_empty() {
            empty_levels += 1;
            if empty_levels > depth {
                break;
            }
            level = (level + 1) % depth;
            stale = 0;
            continue;
        }
        empty_levels = 0;
        let clause = f.clause(*rng.pick(&touching) as usize);
        ties.clear();
        if rng.chance(p.noise) {
            ties.extend(clause.iter().map(|l| l.var()).filter(|&v| on_level(v, level)));
        } else {
            let mut best_score = i64::MIN;
            for lit in clause.iter().filter(|l| on_level(l.var(), level)) {
                let s = st.score(lit.var()).score;
                if s > best_score {
                    best_score = s;
                    ties.clear();
                }
                if s == best_score && !ties.contains(&lit.var()) {
                    ties.push(lit.var());
                }
            }
        }
        st.flip(*rng.pick(&ties));
        if budget.record(&st) {
            stale = 0;
        } else {
            stale += 1;
            if stale >= p.stagnation_window {
                level = (level + 1) % depth;
                stale = 0;
            }
        }
    }
    budget.finish(f)
}
