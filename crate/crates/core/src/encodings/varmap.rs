use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cnf::Var;

/// Family that holds the auxiliary variables of cardinality constraints.
pub const AUX_FAMILY: &str = "aux";

/// A named family of variables keyed by semantic index tuples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Family {
    entries: Vec<(Vec<u32>, Var)>,
    lookup: HashMap<Vec<u32>, Var>,
}

impl Family {
    pub fn entries(&self) -> &[(Vec<u32>, Var)] {
        &self.entries
    }

    pub fn get(&self, index: &[u32]) -> Option<Var> {
        self.lookup.get(index).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }
}

/// Registry from semantic variables (family + index tuple) to CNF variables,
/// plus scalar metadata such as the bound and instance size.
///
/// Serialised as `{"families": {name: [[index, var], ...]}, "meta": {...}}`;
/// this JSON is what candidate programs receive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarMap {
    families: BTreeMap<String, Family>,
    meta: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct VarMapJson {
    families: BTreeMap<String, Vec<(Vec<u32>, u32)>>,
    meta: BTreeMap<String, Value>,
}

impl VarMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `var` under `family[index]`. Panics if the index is taken:
    /// encoders never register twice.
    pub fn insert(&mut self, family: &str, index: &[u32], var: Var) {
        let fam = self.families.entry(family.to_string()).or_default();
        let prev = fam.lookup.insert(index.to_vec(), var);
        assert!(prev.is_none(), "{family}{index:?} registered twice");
        fam.entries.push((index.to_vec(), var));
    }

    pub fn get(&self, family: &str, index: &[u32]) -> Option<Var> {
        self.families.get(family)?.get(index)
    }

    pub fn family(&self, name: &str) -> Option<&Family> {
        self.families.get(name)
    }

    pub fn family_names(&self) -> impl Iterator<Item = &str> {
        self.families.keys().map(String::as_str)
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn meta(&self, key: &str) -> Option<&Value> {
        self.meta.get(key)
    }

    pub fn meta_u64(&self, key: &str) -> Option<u64> {
        self.meta.get(key)?.as_u64()
    }

    pub fn num_registered(&self) -> usize {
        self.families.values().map(Family::len).sum()
    }

    /// Reverse lookup table: variable index → (family, index tuple).
    pub fn reverse(&self) -> HashMap<Var, (&str, &[u32])> {
        self.families
            .iter()
            .flat_map(|(name, fam)| fam.entries.iter().map(move |(idx, v)| (*v, (name.as_str(), idx.as_slice()))))
            .collect()
    }

    /// Checks that no variable is registered twice and that the registered
    /// variables are exactly `1..=num_vars`, with auxiliaries after every
    /// semantic variable.
    pub fn validate(&self, num_vars: u32) -> Result<(), String> {
        let mut owner: Vec<Option<&str>> = vec![None; num_vars as usize];
        for (name, fam) in &self.families {
            for (idx, v) in &fam.entries {
                let slot = owner
                    .get_mut(v.index())
                    .ok_or_else(|| format!("{name}{idx:?} = {v} exceeds {num_vars} variables"))?;
                if let Some(other) = slot {
                    return Err(format!("variable {v} registered in `{other}` and `{name}`"));
                }
                *slot = Some(name);
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(format!("variable {} is not registered", i + 1));
        }
        let first_aux = owner.iter().position(|o| *o == Some(AUX_FAMILY));
        if let Some(first) = first_aux {
            if let Some(j) = owner[first..].iter().position(|o| *o != Some(AUX_FAMILY)) {
                return Err(format!(
                    "semantic variable {} follows auxiliary variable {}",
                    first + j + 1,
                    first + 1
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let json = VarMapJson {
            families: self
                .families
                .iter()
                .map(|(k, f)| (k.clone(), f.entries.iter().map(|(i, v)| (i.clone(), v.id())).collect()))
                .collect(),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&json).expect("varmap serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let json: VarMapJson = serde_json::from_str(text)?;
        let mut vm = VarMap::new();
        for (name, entries) in json.families {
            for (idx, v) in entries {
                if v == 0 {
                    return Err(serde::de::Error::custom("variable ids are 1-based"));
                }
                let fam = vm.families.entry(name.clone()).or_default();
                if fam.lookup.insert(idx.clone(), Var::new(v)).is_some() {
                    return Err(serde::de::Error::custom(format!("{name}{idx:?} listed twice")));
                }
                fam.entries.push((idx, Var::new(v)));
            }
        }
        vm.meta = json.meta;
        Ok(vm)
    }
}
