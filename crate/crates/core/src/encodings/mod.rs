//! Encoding schemes: instance → (CNF, variable map), their decoders,
//! cardinality constraints and the upper-bound heuristics that pick a bound
//! when none is given.

mod bddt;
mod bounds;
mod cardinality;
mod coloring;
mod dataset;
mod dfvs;
mod graph;
mod scheme;
mod varmap;

use thiserror::Error;

use crate::cnf::CnfError;

pub use bddt::{decode_bddt, encode_bddt, DecisionTree, TreeNode, PASS_THROUGH};
pub use bounds::{dsatur_coloring, dsatur_upper_bound, greedy_fvs, greedy_fvs_upper_bound, greedy_tree_depth};
pub use cardinality::{encode_atmost_k, AtMostK};
pub use coloring::{decode_coloring, encode_coloring, is_proper_coloring};
pub use dataset::Dataset;
pub use dfvs::{decode_dfvs, encode_dfvs, is_acyclic_without};
pub use graph::{Digraph, Graph};
pub use scheme::{scheme_by_name, schemes, Encoded, EncodingScheme, Solution};
pub use varmap::{Family, VarMap, AUX_FAMILY};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid bound: {0}")]
    InvalidBound(String),
    #[error("rows {0} and {1} have identical features but different labels")]
    ContradictoryRows(usize, usize),
    #[error("assignment is not a model of the encoding: {0}")]
    NotAModel(String),
    #[error("unknown encoding scheme `{0}`")]
    UnknownScheme(String),
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

/// Incremental clause collector shared by the encoders.
pub(crate) struct ClauseSink {
    next_var: u32,
    clauses: Vec<Vec<crate::cnf::Lit>>,
}

impl ClauseSink {
    pub(crate) fn new() -> Self {
        ClauseSink {
            next_var: 1,
            clauses: Vec::new(),
        }
    }

    pub(crate) fn fresh(&mut self) -> crate::cnf::Var {
        let v = crate::cnf::Var::new(self.next_var);
        self.next_var += 1;
        v
    }

    pub(crate) fn next_var(&self) -> u32 {
        self.next_var
    }

    pub(crate) fn set_next_var(&mut self, next: u32) {
        self.next_var = next;
    }

    pub(crate) fn add(&mut self, clause: Vec<crate::cnf::Lit>) {
        self.clauses.push(clause);
    }

    pub(crate) fn extend(&mut self, clauses: impl IntoIterator<Item = Vec<crate::cnf::Lit>>) {
        self.clauses.extend(clauses);
    }

    pub(crate) fn finish(self) -> Result<crate::cnf::CnfFormula, CnfError> {
        crate::cnf::CnfFormula::new(self.next_var - 1, self.clauses)
    }
}
