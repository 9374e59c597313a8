use serde::{Deserialize, Serialize};

use super::prompts::{contains_denied, summarize, Prompts};
use super::{extract_code, CallId, ChatMessage, ChatRequest, Evaluator, LlmError, Provider, Role};
use crate::encodings::EncodingScheme;
use crate::runner::{CandidateSpec, Origin, RunResult, RunStatus};
use crate::scoring::EvalRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatherConfig {
    /// Number of generation attempts.
    pub n: usize,
    pub temp_start: f64,
    pub temp_end: f64,
    pub max_tries: u32,
    /// Earlier candidates beyond this many characters are quoted as one-line
    /// summaries, oldest first.
    pub max_context_chars: usize,
    pub max_tokens: u32,
}

impl Default for GatherConfig {
    fn default() -> Self {
        GatherConfig {
            n: 50,
            temp_start: 0.7,
            temp_end: 1.2,
            max_tries: 10,
            max_context_chars: 60_000,
            max_tokens: 4096,
        }
    }
}

impl GatherConfig {
    /// Linear schedule from `temp_start` to `temp_end` over attempts `0..n`.
    pub fn temperature(&self, attempt: usize) -> f64 {
        if self.n <= 1 {
            return self.temp_start;
        }
        self.temp_start + (self.temp_end - self.temp_start) * attempt as f64 / (self.n - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatherAttempt {
    pub candidate: CandidateSpec,
    pub accepted: bool,
    pub repair_rounds: u32,
    /// Status of the last verification.
    pub status: String,
    pub record: Option<EvalRecord>,
}

/// Progress of one provider's gathering run; persisted after every attempt.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GatherState {
    /// Provider calls made by completed attempts.
    pub calls: u64,
    pub attempts: Vec<GatherAttempt>,
}

impl GatherState {
    pub fn accepted(&self) -> impl Iterator<Item = &GatherAttempt> {
        self.attempts.iter().filter(|a| a.accepted)
    }
}

/// A conversation stream on one provider. Every outgoing system and user
/// message is checked against the deny list.
pub struct Session<'p> {
    pub provider: &'p dyn Provider,
    pub stream: String,
    pub calls: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub deny: &'static [&'static str],
}

impl Session<'_> {
    pub fn ask(&mut self, conversation: &[ChatMessage]) -> Result<String, LlmError> {
        for m in conversation.iter().filter(|m| m.role != Role::Assistant) {
            if let Some(w) = contains_denied(&m.content, self.deny) {
                return Err(LlmError::Hygiene(format!("{}#{}", self.stream, self.calls), w.to_string()));
            }
        }
        let id = CallId {
            stream: self.stream.clone(),
            index: self.calls,
        };
        let request = ChatRequest {
            messages: conversation.to_vec(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let resp = self.provider.complete(&id, &request)?;
        self.calls += 1;
        Ok(resp.content)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RepairOutcome {
    Fixed { spec: CandidateSpec, tries: u32, status: RunStatus },
    GiveUp { tries: u32, last: RunStatus },
}

fn describe_failure(status: &RunStatus) -> (String, Option<u32>) {
    match status {
        RunStatus::RuntimeError { message, line } => (message.clone(), *line),
        RunStatus::InvalidOutput { reason } => (format!("invalid output: {reason}"), None),
        RunStatus::HardTimeout => ("the program did not exit before the hard time limit".into(), None),
        RunStatus::Ok | RunStatus::SoftTimeoutOk => unreachable!("not a failure"),
    }
}

/// Sends the failure back on the ongoing conversation until a returned
/// version verifies or `max_tries` requests have been made.
/// `conversation` must end with the failing program's assistant message.
pub fn repair_loop(
    session: &mut Session<'_>,
    conversation: &mut Vec<ChatMessage>,
    candidate: &CandidateSpec,
    failure: &RunResult,
    evaluator: &dyn Evaluator,
    prompts: &Prompts<'_>,
    max_tries: u32,
) -> Result<RepairOutcome, LlmError> {
    if failure.status.returned() {
        return Err(LlmError::Precondition(format!(
            "repair requested for `{}` whose verification returned {}",
            candidate.id,
            failure.status.label()
        )));
    }
    let mut last = failure.status.clone();
    for tries in 1..=max_tries {
        if evaluator.cancelled() {
            return Err(LlmError::Interrupted);
        }
        let (error, line) = describe_failure(&last);
        conversation.push(ChatMessage::user(prompts.repair(&error, line)));
        let reply = session.ask(conversation)?;
        conversation.push(ChatMessage::assistant(reply.clone()));
        let spec = CandidateSpec {
            source: extract_code(&reply),
            ..candidate.clone()
        };
        let r = evaluator.verify(&spec);
        if r.status.returned() {
            return Ok(RepairOutcome::Fixed {
                spec,
                tries,
                status: r.status,
            });
        }
        last = r.status;
    }
    Ok(RepairOutcome::GiveUp { tries: max_tries, last })
}

fn context_entries(accepted: &[&GatherAttempt], budget: usize) -> Vec<String> {
    let full: Vec<String> = accepted
        .iter()
        .map(|a| format!("### {}\n```python\n{}```", a.candidate.id, a.candidate.source))
        .collect();
    let short: Vec<String> = accepted
        .iter()
        .map(|a| format!("- {}: {}", a.candidate.id, summarize(&a.candidate.source)))
        .collect();
    let mut summarized = 0;
    let size = |s: usize| -> usize { short[..s].iter().chain(&full[s..]).map(|e| e.len() + 1).sum() };
    while summarized < accepted.len() && size(summarized) > budget {
        summarized += 1;
    }
    short[..summarized].iter().chain(&full[summarized..]).cloned().collect()
}

/// Runs attempts `state.attempts.len()..cfg.n` on `provider`, one fresh
/// conversation each. A returned program is scored on the training set;
/// a failing one goes through [`repair_loop`]. `persist` is called after
/// every attempt so an interrupted run resumes where it stopped.
pub fn gather(
    scheme: &dyn EncodingScheme,
    provider: &dyn Provider,
    evaluator: &dyn Evaluator,
    cfg: &GatherConfig,
    state: &mut GatherState,
    persist: &mut dyn FnMut(&GatherState) -> std::io::Result<()>,
) -> Result<(), LlmError> {
    if scheme.source_text().trim().is_empty() {
        return Err(LlmError::Precondition("scheme source is empty".into()));
    }
    if cfg.n == 0 {
        return Err(LlmError::Precondition("n must be at least 1".into()));
    }
    let prompts = Prompts { deny: scheme.deny_list() };
    for attempt in state.attempts.len()..cfg.n {
        if evaluator.cancelled() {
            return Err(LlmError::Interrupted);
        }
        let id = format!("{}-g{:02}", provider.name(), attempt + 1);
        let accepted: Vec<&GatherAttempt> = state.accepted().collect();
        let previous = context_entries(&accepted, cfg.max_context_chars);
        let mut session = Session {
            provider,
            stream: format!("gather:{}", provider.name()),
            calls: state.calls,
            temperature: cfg.temperature(attempt),
            max_tokens: cfg.max_tokens,
            deny: scheme.deny_list(),
        };
        let mut conversation = vec![
            ChatMessage::system(prompts.system()),
            ChatMessage::user(prompts.gather(scheme.source_text(), &previous)),
        ];
        let reply = session.ask(&conversation)?;
        conversation.push(ChatMessage::assistant(reply.clone()));
        let spec = CandidateSpec::python(&id, extract_code(&reply), Origin::Base, None);
        let first = evaluator.verify(&spec);
        let (spec, ok, rounds, status) = if first.status.returned() {
            let label = first.status.label().to_string();
            (spec, true, 0, label)
        } else {
            match repair_loop(
                &mut session,
                &mut conversation,
                &spec,
                &first,
                evaluator,
                &prompts,
                cfg.max_tries,
            )? {
                RepairOutcome::Fixed { spec, tries, status } => (spec, true, tries, status.label().to_string()),
                RepairOutcome::GiveUp { tries, last } => {
                    log::warn!("{id}: gave up after {tries} repair rounds ({})", last.label());
                    (spec, false, tries, last.label().to_string())
                }
            }
        };
        let record = if ok { Some(evaluator.score(&spec)?) } else { None };
        if evaluator.cancelled() {
            return Err(LlmError::Interrupted);
        }
        state.attempts.push(GatherAttempt {
            candidate: spec,
            accepted: ok,
            repair_rounds: rounds,
            status,
            record,
        });
        state.calls = session.calls;
        persist(state)?;
    }
    Ok(())
}
