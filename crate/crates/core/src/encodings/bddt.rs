//! Bounded-depth decision tree encoding over a complete binary tree.
//!
//! Internal nodes are numbered in heap order (`1` is the root, children of
//! `t` are `2t` and `2t + 1`); leaves are numbered `1..=2^depth` left to
//! right. A row goes left at a node iff its value of the tested feature is
//! at most the chosen threshold.

use crate::cnf::{Assignment, CnfFormula, Lit, Var};

use super::{ClauseSink, Dataset, EncodeError, VarMap};

/// Threshold of the pass-through choice: every row goes left.
pub const PASS_THROUGH: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Zero-based feature index.
    pub feature: usize,
    pub threshold: f64,
}

/// A complete binary decision tree of fixed depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub depth: usize,
    /// Internal nodes in heap order, `nodes[t - 1]` for node `t`.
    pub nodes: Vec<TreeNode>,
    /// Class id per leaf, left to right.
    pub leaves: Vec<usize>,
}

impl DecisionTree {
    pub fn classify(&self, row: &[f64]) -> usize {
        let internal = self.nodes.len();
        let mut t = 1;
        while t <= internal {
            let node = &self.nodes[t - 1];
            t = if row[node.feature] <= node.threshold { 2 * t } else { 2 * t + 1 };
        }
        self.leaves[t - internal - 1]
    }

    /// Number of rows classified correctly.
    pub fn correct(&self, data: &Dataset) -> usize {
        data.rows()
            .iter()
            .zip(data.labels())
            .filter(|(row, &label)| self.classify(row) == label)
            .count()
    }
}

fn thresholds_of(data: &Dataset) -> Vec<Vec<f64>> {
    (0..data.feature_count())
        .map(|f| {
            let mut cuts = data.cuts(f);
            cuts.push(PASS_THROUGH);
            cuts
        })
        .collect()
}

/// `(node, went_left)` pairs from the root down to leaf `leaf` (1-based).
pub(crate) fn leaf_path(depth: usize, leaf: usize) -> Vec<(usize, bool)> {
    let internal = (1usize << depth) - 1;
    let mut h = internal + leaf;
    let mut path = Vec::with_capacity(depth);
    while h > 1 {
        path.push((h / 2, h % 2 == 0));
        h /= 2;
    }
    path.reverse();
    path
}

fn exactly_one(sink: &mut ClauseSink, vars: &[Var]) {
    sink.add(vars.iter().map(|v| v.pos()).collect());
    for (i, a) in vars.iter().enumerate() {
        for b in &vars[i + 1..] {
            sink.add(vec![a.neg(), b.neg()]);
        }
    }
}

/// Families: `a(t, f)` node `t` tests feature `f`; `s(t, f, j)` node `t`
/// uses the `j`-th threshold of `f` (the last `j` of every feature is the
/// pass-through); `c(l, class)` leaf class; `d(r, t)` row `r` goes left at
/// node `t`. Features and rows are 1-based in index tuples, classes 0-based.
pub fn encode_bddt(data: &Dataset, depth: usize) -> Result<(CnfFormula, VarMap), EncodeError> {
    if depth < 1 {
        return Err(EncodeError::InvalidBound("tree depth must be at least 1".into()));
    }
    if depth > 16 {
        return Err(EncodeError::InvalidBound(format!("tree depth {depth} is too large")));
    }
    if data.feature_count() == 0 {
        return Err(EncodeError::InvalidInstance("dataset has no features".into()));
    }
    let internal = (1usize << depth) - 1;
    let leaves = 1usize << depth;
    let nf = data.feature_count();
    let nc = data.num_classes().max(1);
    let thresholds = thresholds_of(data);

    let mut sink = ClauseSink::new();
    let mut vm = VarMap::new();

    let mut a = vec![vec![Var::new(1); nf]; internal + 1];
    let mut s = vec![vec![Vec::new(); nf]; internal + 1];
    for t in 1..=internal {
        for f in 0..nf {
            let var = sink.fresh();
            vm.insert("a", &[t as u32, f as u32 + 1], var);
            a[t][f] = var;
        }
        for f in 0..nf {
            for j in 0..thresholds[f].len() {
                let var = sink.fresh();
                vm.insert("s", &[t as u32, f as u32 + 1, j as u32 + 1], var);
                s[t][f].push(var);
            }
        }
    }
    let mut c = vec![Vec::new(); leaves + 1];
    for (l, row) in c.iter_mut().enumerate().skip(1) {
        for class in 0..nc {
            let var = sink.fresh();
            vm.insert("c", &[l as u32, class as u32], var);
            row.push(var);
        }
    }
    let mut d = vec![vec![Var::new(1); internal + 1]; data.len()];
    for (r, row) in d.iter_mut().enumerate() {
        for (t, slot) in row.iter_mut().enumerate().skip(1) {
            let var = sink.fresh();
            vm.insert("d", &[r as u32 + 1, t as u32], var);
            *slot = var;
        }
    }

    for t in 1..=internal {
        exactly_one(&mut sink, &a[t]);
        for f in 0..nf {
            let mut alo: Vec<Lit> = vec![a[t][f].neg()];
            alo.extend(s[t][f].iter().map(|v| v.pos()));
            sink.add(alo);
            for (i, &sj) in s[t][f].iter().enumerate() {
                sink.add(vec![sj.neg(), a[t][f].pos()]);
                for &sk in &s[t][f][i + 1..] {
                    sink.add(vec![sj.neg(), sk.neg()]);
                }
            }
        }
    }
    for row in c.iter().skip(1) {
        exactly_one(&mut sink, row);
    }
    for (r, dr) in d.iter().enumerate() {
        for t in 1..=internal {
            for f in 0..nf {
                let x = data.value(r, f);
                for (j, &thr) in thresholds[f].iter().enumerate() {
                    let dir = dr[t].lit(x <= thr);
                    sink.add(vec![s[t][f][j].neg(), dir]);
                }
            }
        }
        let label = data.labels()[r];
        for l in 1..=leaves {
            let mut clause: Vec<Lit> = leaf_path(depth, l)
                .into_iter()
                .map(|(t, left)| dr[t].lit(!left))
                .collect();
            clause.push(c[l][label].pos());
            sink.add(clause);
        }
    }

    vm.set_meta("scheme", "bddt");
    vm.set_meta("depth", depth);
    vm.set_meta("k", depth);
    vm.set_meta("rows", data.len());
    vm.set_meta("features", nf);
    vm.set_meta("classes", nc);
    let finite: Vec<Vec<f64>> = thresholds
        .iter()
        .map(|t| t[..t.len() - 1].to_vec())
        .collect();
    vm.set_meta("thresholds", serde_json::to_value(finite).expect("finite floats"));
    Ok((sink.finish()?, vm))
}

/// Reads the tree off a model; the lowest-index true choice wins ties.
pub fn decode_bddt(model: &Assignment, vm: &VarMap) -> Result<DecisionTree, EncodeError> {
    let missing = |what: &str| EncodeError::NotAModel(format!("varmap lacks `{what}`"));
    let depth = vm.meta_u64("depth").ok_or_else(|| missing("depth"))? as usize;
    let nf = vm.meta_u64("features").ok_or_else(|| missing("features"))? as usize;
    let nc = vm.meta_u64("classes").ok_or_else(|| missing("classes"))? as usize;
    let thresholds: Vec<Vec<f64>> = vm
        .meta("thresholds")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .ok_or_else(|| missing("thresholds"))?;
    let is_true = |fam: &str, idx: &[u32]| vm.get(fam, idx).and_then(|v| model.get(v)).unwrap_or(false);

    let internal = (1usize << depth) - 1;
    let mut nodes = Vec::with_capacity(internal);
    for t in 1..=internal {
        let f = (0..nf)
            .find(|&f| is_true("a", &[t as u32, f as u32 + 1]))
            .ok_or_else(|| EncodeError::NotAModel(format!("node {t} tests no feature")))?;
        let options = thresholds[f].len() + 1;
        let j = (0..options)
            .find(|&j| is_true("s", &[t as u32, f as u32 + 1, j as u32 + 1]))
            .ok_or_else(|| EncodeError::NotAModel(format!("node {t} has no threshold")))?;
        let threshold = thresholds[f].get(j).copied().unwrap_or(PASS_THROUGH);
        nodes.push(TreeNode { feature: f, threshold });
    }
    let leaves = (1..=(1usize << depth))
        .map(|l| {
            (0..nc)
                .find(|&class| is_true("c", &[l as u32, class as u32]))
                .ok_or_else(|| EncodeError::NotAModel(format!("leaf {l} has no class")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DecisionTree { depth, nodes, leaves })
}
