use std::collections::HashSet;
use std::fmt::Write as _;

use super::EncodeError;

/// Undirected simple graph on vertices `1..=n`. Edges are stored with the
/// smaller endpoint first, in input order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

/// Directed graph on vertices `1..=n` without self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    arcs: Vec<(usize, usize)>,
}

fn check_endpoints(n: usize, u: usize, v: usize) -> Result<(), String> {
    if u == 0 || v == 0 || u > n || v > n {
        return Err(format!("edge ({u}, {v}) has an endpoint outside 1..={n}"));
    }
    if u == v {
        return Err(format!("self-loop on vertex {u}"));
    }
    Ok(())
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, EncodeError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (u, v) in edges {
            check_endpoints(n, u, v).map_err(EncodeError::InvalidInstance)?;
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(EncodeError::InvalidInstance(format!("duplicate edge {{{u}, {v}}}")));
            }
            out.push(e);
        }
        Ok(Graph { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Adjacency lists indexed by vertex (index 0 unused).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + 1];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n + 1];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn parse(text: &str) -> Result<Self, EncodeError> {
        let (n, pairs) = parse_graph_text(text, 'u')?;
        Graph::new(n, pairs)
    }

    pub fn to_text(&self) -> String {
        to_text(self.n, &self.edges, 'u')
    }
}

impl Digraph {
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, EncodeError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (u, v) in arcs {
            check_endpoints(n, u, v).map_err(|msg| {
                EncodeError::InvalidInstance(if u == v {
                    format!("{msg}: a self-loop vertex belongs to every feedback set, remove it first")
                } else {
                    msg
                })
            })?;
            if !seen.insert((u, v)) {
                return Err(EncodeError::InvalidInstance(format!("duplicate arc ({u}, {v})")));
            }
            out.push((u, v));
        }
        Ok(Digraph { n, arcs: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.n + 1];
        for &(u, v) in &self.arcs {
            succ[u].push(v);
        }
        succ
    }

    pub fn parse(text: &str) -> Result<Self, EncodeError> {
        let (n, pairs) = parse_graph_text(text, 'd')?;
        Digraph::new(n, pairs)
    }

    pub fn to_text(&self) -> String {
        to_text(self.n, &self.arcs, 'd')
    }
}

fn to_text(n: usize, pairs: &[(usize, usize)], kind: char) -> String {
    let mut out = format!("p {} {} {}\n", n, pairs.len(), kind);
    for (u, v) in pairs {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// `p <n> <m> <u|d>` followed by `m` lines `u v`; `c` lines are comments.
fn parse_graph_text(text: &str, want: char) -> Result<(usize, Vec<(usize, usize)>), EncodeError> {
    let err = |line: usize, msg: String| EncodeError::Parse { line, msg };
    let mut header: Option<(usize, usize)> = None;
    let mut pairs = Vec::new();
    let mut last = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "p" {
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            if fields.len() != 4 {
                return Err(err(line_no, format!("malformed header `{line}`")));
            }
            let n = fields[1]
                .parse()
                .map_err(|_| err(line_no, format!("bad vertex count `{}`", fields[1])))?;
            let m = fields[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad edge count `{}`", fields[2])))?;
            let kind = fields[3];
            if kind.len() != 1 || !kind.starts_with(want) {
                let expected = if want == 'u' { "undirected (u)" } else { "directed (d)" };
                return Err(err(line_no, format!("expected a {expected} graph, header says `{kind}`")));
            }
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(err(line_no, "edge before header".into()));
        };
        if fields.len() != 2 {
            return Err(err(line_no, format!("expected `u v`, got `{line}`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(line_no, format!("bad vertex `{s}`")))
        };
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        check_endpoints(n, u, v).map_err(|m| err(line_no, m))?;
        pairs.push((u, v));
    }
    let Some((n, m)) = header else {
        return Err(err(last, "missing `p <n> <m> <u|d>` header".into()));
    };
    if pairs.len() != m {
        return Err(err(last, format!("header declares {m} edges but {} were read", pairs.len())));
    }
    Ok((n, pairs))
}
