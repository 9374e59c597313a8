use crate::cnf::{Assignment, CnfFormula};

use super::{
    decode_bddt, decode_coloring, decode_dfvs, dsatur_upper_bound, encode_bddt, encode_coloring, encode_dfvs,
    greedy_fvs_upper_bound, greedy_tree_depth, is_acyclic_without, is_proper_coloring, Dataset, DecisionTree,
    Digraph, EncodeError, Graph, VarMap,
};

/// An encoded instance together with the bound it was encoded for.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub formula: CnfFormula,
    pub varmap: VarMap,
    pub bound: i64,
}

/// A decoded and validated solution.
#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    /// Colour per vertex, index 0 unused.
    Coloring(Vec<usize>),
    /// Deleted vertices.
    VertexSet(Vec<usize>),
    Tree(DecisionTree),
}

/// A named encoding scheme: instance bytes in, CNF and variable map out.
pub trait EncodingScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Encodes with `bound`, or with [`EncodingScheme::upper_bound`] when `None`.
    fn encode(&self, instance: &[u8], bound: Option<i64>) -> Result<Encoded, EncodeError>;

    fn upper_bound(&self, instance: &[u8]) -> Result<i64, EncodeError>;

    /// Decodes a model and checks the solution against the instance.
    fn decode(&self, instance: &[u8], model: &Assignment, vm: &VarMap) -> Result<Solution, EncodeError>;

    /// Encoder source as shown to the language model.
    fn source_text(&self) -> &'static str;

    /// Lower-case words that reveal what the scheme encodes; prompts must
    /// never contain them.
    fn deny_list(&self) -> &'static [&'static str];
}

fn utf8(instance: &[u8]) -> Result<&str, EncodeError> {
    std::str::from_utf8(instance).map_err(|e| EncodeError::Parse {
        line: 0,
        msg: format!("instance is not UTF-8: {e}"),
    })
}

fn bound_usize(bound: i64) -> Result<usize, EncodeError> {
    usize::try_from(bound).map_err(|_| EncodeError::InvalidBound(format!("{bound} is negative")))
}

struct ColoringScheme;
struct DfvsScheme;
struct TreeScheme;

impl EncodingScheme for ColoringScheme {
    fn name(&self) -> &'static str {
        "coloring"
    }

    fn encode(&self, instance: &[u8], bound: Option<i64>) -> Result<Encoded, EncodeError> {
        let g = Graph::parse(utf8(instance)?)?;
        let bound = bound.unwrap_or_else(|| dsatur_upper_bound(&g) as i64);
        let (formula, varmap) = encode_coloring(&g, bound_usize(bound)?)?;
        Ok(Encoded { formula, varmap, bound })
    }

    fn upper_bound(&self, instance: &[u8]) -> Result<i64, EncodeError> {
        Ok(dsatur_upper_bound(&Graph::parse(utf8(instance)?)?) as i64)
    }

    fn decode(&self, instance: &[u8], model: &Assignment, vm: &VarMap) -> Result<Solution, EncodeError> {
        let g = Graph::parse(utf8(instance)?)?;
        let colors = decode_coloring(model, vm)?;
        if !is_proper_coloring(&g, &colors) {
            return Err(EncodeError::NotAModel("decoded colouring is not proper".into()));
        }
        Ok(Solution::Coloring(colors))
    }

    fn source_text(&self) -> &'static str {
        include_str!("../../assets/schemes/coloring.py")
    }

    fn deny_list(&self) -> &'static [&'static str] {
        &["coloring", "colouring", "color", "colour", "chromatic"]
    }
}

impl EncodingScheme for DfvsScheme {
    fn name(&self) -> &'static str {
        "dfvs"
    }

    fn encode(&self, instance: &[u8], bound: Option<i64>) -> Result<Encoded, EncodeError> {
        let g = Digraph::parse(utf8(instance)?)?;
        let bound = bound.unwrap_or_else(|| greedy_fvs_upper_bound(&g) as i64);
        let (formula, varmap) = encode_dfvs(&g, bound)?;
        Ok(Encoded { formula, varmap, bound })
    }

    fn upper_bound(&self, instance: &[u8]) -> Result<i64, EncodeError> {
        Ok(greedy_fvs_upper_bound(&Digraph::parse(utf8(instance)?)?) as i64)
    }

    fn decode(&self, instance: &[u8], model: &Assignment, vm: &VarMap) -> Result<Solution, EncodeError> {
        let g = Digraph::parse(utf8(instance)?)?;
        let set = decode_dfvs(model, vm)?;
        if !is_acyclic_without(&g, &set) {
            return Err(EncodeError::NotAModel("residual graph has a cycle".into()));
        }
        if let Some(k) = vm.meta("k").and_then(|v| v.as_i64()) {
            if set.len() as i64 > k {
                return Err(EncodeError::NotAModel(format!("{} deletions exceed the budget {k}", set.len())));
            }
        }
        Ok(Solution::VertexSet(set))
    }

    fn source_text(&self) -> &'static str {
        include_str!("../../assets/schemes/dfvs.py")
    }

    fn deny_list(&self) -> &'static [&'static str] {
        &["feedback", "dfvs", "fvs", "acyclic"]
    }
}

impl EncodingScheme for TreeScheme {
    fn name(&self) -> &'static str {
        "bddt"
    }

    fn encode(&self, instance: &[u8], bound: Option<i64>) -> Result<Encoded, EncodeError> {
        let data = Dataset::parse_csv(utf8(instance)?)?;
        let bound = bound.unwrap_or_else(|| greedy_tree_depth(&data) as i64);
        let (formula, varmap) = encode_bddt(&data, bound_usize(bound)?)?;
        Ok(Encoded { formula, varmap, bound })
    }

    fn upper_bound(&self, instance: &[u8]) -> Result<i64, EncodeError> {
        Ok(greedy_tree_depth(&Dataset::parse_csv(utf8(instance)?)?) as i64)
    }

    fn decode(&self, instance: &[u8], model: &Assignment, vm: &VarMap) -> Result<Solution, EncodeError> {
        let data = Dataset::parse_csv(utf8(instance)?)?;
        let tree = decode_bddt(model, vm)?;
        let correct = tree.correct(&data);
        if correct != data.len() {
            return Err(EncodeError::NotAModel(format!(
                "tree classifies {correct} of {} rows correctly",
                data.len()
            )));
        }
        Ok(Solution::Tree(tree))
    }

    fn source_text(&self) -> &'static str {
        include_str!("../../assets/schemes/bddt.py")
    }

    fn deny_list(&self) -> &'static [&'static str] {
        &["decision tree", "bddt", "classifier", "classification"]
    }
}

static SCHEMES: [&dyn EncodingScheme; 3] = [&ColoringScheme, &DfvsScheme, &TreeScheme];

pub fn schemes() -> &'static [&'static dyn EncodingScheme] {
    &SCHEMES
}

pub fn scheme_by_name(name: &str) -> Result<&'static dyn EncodingScheme, EncodeError> {
    SCHEMES
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| EncodeError::UnknownScheme(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_do_not_leak_their_own_names() {
        for scheme in schemes() {
            let src = scheme.source_text().to_lowercase();
            assert!(!src.is_empty());
            for word in schemes().iter().flat_map(|s| s.deny_list()) {
                assert!(!src.contains(word), "{} source mentions `{word}`", scheme.name());
            }
        }
    }

    #[test]
    fn bound_defaults_to_heuristic() {
        let s = scheme_by_name("coloring").unwrap();
        let enc = s.encode(b"p 3 3 u\n1 2\n2 3\n1 3\n", None).unwrap();
        assert_eq!(enc.bound, 3);
        assert_eq!(enc.formula.num_clauses(), 12);
        assert!(scheme_by_name("nope").is_err());
    }
}
