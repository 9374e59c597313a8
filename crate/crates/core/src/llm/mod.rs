//! Gathering, repair and refinement loops around a chat-completions
//! provider, with cassette record/replay for runs without network access.

mod cassette;
mod gather;
mod http;
mod prompts;
mod refine;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{CandidateSpec, RunResult};
use crate::scoring::{rank, EvalRecord, ScoringError};

pub use cassette::{CassetteEntry, Recorder, Replayer, ScriptedProvider};
pub use gather::{gather, repair_loop, GatherAttempt, GatherConfig, GatherState, RepairOutcome, Session};
pub use http::HttpProvider;
pub use prompts::{contains_denied, mask_denied, summarize, template_hashes, Prompts, TEMPLATE_NAMES};
pub use refine::{refine, Feedback, RefineConfig, RefineState, Version, STRUCTURE_FROM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// Position of a request in its conversation stream. Streams are named by
/// the caller (`gather:<provider>`, `refine:<base>`); indices count from 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallId {
    pub stream: String,
    pub index: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, backoff_ms: 2000 }
    }
}

/// Chat-completions endpoint settings. Only the name of the environment
/// variable holding the API key is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Label used in candidate ids and stream names.
    pub name: String,
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    4096
}

fn default_timeout() -> u64 {
    300
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0) {
            return Err(format!("provider `{}`: temperature must be >= 0", self.name));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("provider name `{}` must be non-empty [A-Za-z0-9_-]", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider `{provider}` failed: {message}")]
    Provider { provider: String, message: String },
    #[error("cassette mismatch at {stream}#{index}: {detail}")]
    ReplayMismatch { stream: String, index: u64, detail: String },
    #[error("cassette has no entry for {stream}#{index}")]
    ReplayExhausted { stream: String, index: u64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("prompt for {0} contains a denied word `{1}`")]
    Hygiene(String, String),
    #[error("interrupted")]
    Interrupted,
    #[error("cassette i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

/// A chat backend. Implementations must be usable from several refinement
/// chains at once.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, id: &CallId, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Verification and training-set scoring, supplied by the pipeline.
pub trait Evaluator: Sync {
    /// Runs on the easy verification instance.
    fn verify(&self, c: &CandidateSpec) -> RunResult;

    /// Scores on every training instance.
    fn score(&self, c: &CandidateSpec) -> Result<EvalRecord, LlmError>;

    /// True once the run should stop.
    fn cancelled(&self) -> bool {
        false
    }
}

/// Pulls the program out of a reply: the longest fenced block if any,
/// otherwise the whole reply.
pub fn extract_code(reply: &str) -> String {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in reply.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b),
                None => current = Some(String::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    if let Some(b) = current {
        blocks.push(b);
    }
    match blocks.into_iter().max_by_key(|b| b.len()) {
        Some(b) => b,
        None => {
            let mut s = reply.trim().to_string();
            s.push('\n');
            s
        }
    }
}

/// The first `k` clean candidates of each provider group by rank. Groups
/// with fewer clean candidates yield all of them and a warning.
pub fn select_top<'a>(
    groups: &'a BTreeMap<String, Vec<(CandidateSpec, EvalRecord)>>,
    k: usize,
) -> Result<(Vec<&'a CandidateSpec>, Vec<String>), LlmError> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (provider, members) in groups {
        let clean: Vec<EvalRecord> = members
            .iter()
            .filter(|(_, r)| !r.had_runtime_error)
            .map(|(_, r)| r.clone())
            .collect();
        let ranked = rank(&clean)?;
        if ranked.len() < k {
            warnings.push(format!(
                "provider `{provider}`: only {} clean candidates, wanted {k}",
                ranked.len()
            ));
        }
        for r in ranked.into_iter().take(k) {
            let spec = members
                .iter()
                .find(|(c, _)| c.id == r.candidate)
                .map(|(c, _)| c)
                .expect("ranked record belongs to the group");
            out.push(spec);
        }
    }
    Ok((out, warnings))
}

#[cfg(test)]
mod tests;
