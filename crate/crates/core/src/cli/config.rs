use std::collections::BTreeMap;
use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{GatherConfig, ProviderConfig, RefineConfig};
use crate::scoring::SplitThresholds;

/// Seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeouts {
    pub train_soft: f64,
    pub train_hard: f64,
    pub train_sat: f64,
    pub test_soft: f64,
    pub test_hard: f64,
    pub test_sat: f64,
    pub reference_sat: f64,
    pub verify_soft: f64,
    pub verify_hard: f64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            train_soft: 60.0,
            train_hard: 120.0,
            train_sat: 120.0,
            test_soft: 900.0,
            test_hard: 1800.0,
            test_sat: 3600.0,
            reference_sat: 3600.0,
            verify_soft: crate::runner::VERIFY_SOFT,
            verify_hard: crate::runner::VERIFY_HARD,
        }
    }
}

impl Timeouts {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("train_soft", self.train_soft),
            ("train_hard", self.train_hard),
            ("train_sat", self.train_sat),
            ("test_soft", self.test_soft),
            ("test_hard", self.test_hard),
            ("test_sat", self.test_sat),
            ("reference_sat", self.reference_sat),
            ("verify_soft", self.verify_soft),
            ("verify_hard", self.verify_hard),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("timeouts.{name} must be positive, got {v}"));
            }
        }
        for (soft, hard, name) in [
            (self.train_soft, self.train_hard, "train"),
            (self.test_soft, self.test_hard, "test"),
            (self.verify_soft, self.verify_hard, "verify"),
        ] {
            if hard < soft {
                return Err(format!("timeouts.{name}_hard ({hard}) is below {name}_soft ({soft})"));
            }
        }
        Ok(())
    }
}

/// Everything a pipeline run needs. Loaded from JSON; `${VAR}` is replaced
/// by the environment variable before parsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: String,
    /// Directories (or single files) holding instances.
    pub instances: Vec<PathBuf>,
    /// Encoding bound per instance id; the scheme's heuristic otherwise.
    pub bounds: BTreeMap<String, i64>,
    pub providers: Vec<ProviderConfig>,
    pub timeouts: Timeouts,
    pub split: SplitThresholds,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// `mini` or `external:<path>`.
    pub adapter: String,
    pub gather: GatherConfig,
    pub refine: RefineConfig,
    /// Base candidates refined per provider.
    pub top_k: usize,
    /// Built-in searches evaluated alongside generated ones.
    pub builtins: Vec<String>,
    /// `lsgen-candidate` executable; next to the running binary by default.
    pub candidate_exe: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: String::new(),
            instances: Vec::new(),
            bounds: BTreeMap::new(),
            providers: Vec::new(),
            timeouts: Timeouts::default(),
            split: SplitThresholds::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
            out: PathBuf::from("out"),
            adapter: "mini".into(),
            gather: GatherConfig::default(),
            refine: RefineConfig::default(),
            top_k: 5,
            builtins: Vec::new(),
            candidate_exe: None,
        }
    }
}

/// Replaces `${NAME}` with the variable's value; unset variables are errors.
pub fn interpolate_env(text: &str) -> Result<String, String> {
    let re = Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static pattern");
    let mut missing = None;
    let out = re.replace_all(text, |c: &regex::Captures<'_>| match std::env::var(&c[1]) {
        Ok(v) => v,
        Err(_) => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(format!("environment variable {name} is not set")),
        None => Ok(out.into_owned()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let text = interpolate_env(text)?;
        serde_json::from_str(&text).map_err(|e| format!("line {}: {e}", e.line()))
    }

    pub fn validate(&self) -> Result<(), String> {
        self.timeouts.validate()?;
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        for p in &self.providers {
            p.validate()?;
        }
        let mut names: Vec<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err("provider names must be unique".into());
        }
        if !(self.split.train_min <= self.split.train_max) {
            return Err("split.train_min exceeds split.train_max".into());
        }
        if self.adapter != "mini" && !self.adapter.starts_with("external:") {
            return Err(format!("adapter `{}` is neither `mini` nor `external:<path>`", self.adapter));
        }
        Ok(())
    }
}
