//! Prompt templates. `{{name}}` placeholders are substituted verbatim.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

pub const TEMPLATE_NAMES: [&str; 9] = [
    "system",
    "gather",
    "previous",
    "repair",
    "refine_start",
    "refine_continue",
    "refine_bigger",
    "refine_revert",
    "structure",
];

fn template(name: &str) -> &'static str {
    match name {
        "system" => include_str!("../../assets/prompts/system.txt"),
        "gather" => include_str!("../../assets/prompts/gather.txt"),
        "previous" => include_str!("../../assets/prompts/previous.txt"),
        "repair" => include_str!("../../assets/prompts/repair.txt"),
        "refine_start" => include_str!("../../assets/prompts/refine_start.txt"),
        "refine_continue" => include_str!("../../assets/prompts/refine_continue.txt"),
        "refine_bigger" => include_str!("../../assets/prompts/refine_bigger.txt"),
        "refine_revert" => include_str!("../../assets/prompts/refine_revert.txt"),
        "structure" => include_str!("../../assets/prompts/structure.txt"),
        _ => panic!("unknown template `{name}`"),
    }
}

/// SHA-256 of every template, for run manifests.
pub fn template_hashes() -> BTreeMap<String, String> {
    TEMPLATE_NAMES
        .iter()
        .map(|n| (n.to_string(), hex::encode(Sha256::digest(template(n).as_bytes()))))
        .collect()
}

fn render(name: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template(name).to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

/// First denied word occurring in `text`, case-insensitively.
pub fn contains_denied<'a>(text: &str, deny: &[&'a str]) -> Option<&'a str> {
    let lower = text.to_lowercase();
    deny.iter().copied().find(|w| lower.contains(&w.to_lowercase()))
}

/// Replaces every case-insensitive occurrence of a denied word.
pub fn mask_denied(text: &str, deny: &[&str]) -> String {
    let mut out = text.to_string();
    for w in deny {
        let re = regex::RegexBuilder::new(&regex::escape(w))
            .case_insensitive(true)
            .build()
            .expect("escaped literal");
        out = re.replace_all(&out, "[redacted]").into_owned();
    }
    out
}

/// Renders prompts for one scheme. Text that came from a model is masked
/// against the deny list before it is quoted back.
pub struct Prompts<'a> {
    pub deny: &'a [&'static str],
}

impl Prompts<'_> {
    pub fn system(&self) -> String {
        render("system", &[])
    }

    /// `previous` holds one line or one full source per earlier candidate.
    pub fn gather(&self, encoder: &str, previous: &[String]) -> String {
        let prev = if previous.is_empty() {
            String::new()
        } else {
            let entries = mask_denied(&previous.join("\n"), self.deny);
            render("previous", &[("entries", &entries)])
        };
        render("gather", &[("encoder", encoder.trim_end()), ("previous", &prev)])
    }

    pub fn repair(&self, error: &str, line: Option<u32>) -> String {
        let line = line.map_or_else(String::new, |l| format!("Line: {l}"));
        render("repair", &[("error", &mask_denied(error, self.deny)), ("line", &line)])
    }

    pub fn refine_start(&self) -> String {
        render("refine_start", &[])
    }

    pub fn refine_continue(&self) -> String {
        render("refine_continue", &[])
    }

    pub fn refine_bigger(&self) -> String {
        render("refine_bigger", &[])
    }

    pub fn refine_revert(&self, source: &str) -> String {
        render("refine_revert", &[("source", mask_denied(source, self.deny).trim_end())])
    }

    pub fn structure(&self) -> String {
        render("structure", &[])
    }
}

/// One-line description of a program: its first comment or docstring line,
/// else its first function signature.
pub fn summarize(source: &str) -> String {
    for line in source.lines() {
        let t = line.trim();
        if let Some(c) = t.strip_prefix('#') {
            let c = c.trim();
            if !c.is_empty() && !c.starts_with('!') {
                return c.to_string();
            }
        }
        for q in ["\"\"\"", "'''"] {
            if let Some(d) = t.strip_prefix(q) {
                let d = d.trim_end_matches(q).trim();
                if !d.is_empty() {
                    return d.to_string();
                }
            }
        }
    }
    source
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("def "))
        .unwrap_or("no description")
        .to_string()
}
