use serde::{Deserialize, Serialize};

use super::gather::{repair_loop, RepairOutcome, Session};
use super::prompts::Prompts;
use super::{extract_code, ChatMessage, Evaluator, LlmError, Provider};
use crate::encodings::EncodingScheme;
use crate::runner::{CandidateSpec, Origin};
use crate::scoring::{compare_versions, EvalRecord, Significance};

/// First version whose request carries the structure reminder.
pub const STRUCTURE_FROM: u32 = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub iterations: u32,
    pub max_tries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iterations: 19,
            max_tries: 10,
            temperature: 0.7,
            max_tokens: 4096,
        }
    }
}

/// Instruction attached to the next variation request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Start,
    Continue,
    Bigger,
    Revert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Version {
    pub version: u32,
    pub candidate: CandidateSpec,
    /// Accepted version this one was derived from; `None` for the base.
    pub parent: Option<String>,
    /// Instruction that produced this version.
    pub request: Feedback,
    pub repair_rounds: u32,
    /// `None` when repair gave up.
    pub record: Option<EvalRecord>,
    /// Against the parent; `None` for the base.
    pub significance: Option<Significance>,
    pub reverted: bool,
}

/// One refinement chain; persisted after every round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineState {
    pub base: String,
    pub calls: u64,
    pub conversation: Vec<ChatMessage>,
    pub versions: Vec<Version>,
    pub next: Feedback,
}

impl RefineState {
    /// Starts from a base candidate already scored on the training set.
    pub fn new(scheme: &dyn EncodingScheme, base: CandidateSpec, record: EvalRecord) -> Self {
        let prompts = Prompts { deny: scheme.deny_list() };
        let conversation = vec![
            ChatMessage::system(prompts.system()),
            ChatMessage::user(prompts.gather(scheme.source_text(), &[])),
            ChatMessage::assistant(format!("```python\n{}```", base.source)),
        ];
        RefineState {
            base: base.id.clone(),
            calls: 0,
            conversation,
            versions: vec![Version {
                version: 1,
                candidate: base,
                parent: None,
                request: Feedback::Start,
                repair_rounds: 0,
                record: Some(record),
                significance: None,
                reverted: false,
            }],
            next: Feedback::Start,
        }
    }

    pub fn last_accepted(&self) -> &Version {
        self.versions
            .iter()
            .rev()
            .find(|v| !v.reverted)
            .expect("the base is never reverted")
    }

    pub fn latest(&self) -> &Version {
        self.versions.last().expect("chain holds the base")
    }
}

/// Runs rounds until the chain holds `1 + cfg.iterations` versions. Each
/// round requests a variation, repairs it if needed, scores it and compares
/// it with the last accepted version. Worse versions are kept but flagged
/// reverted; the next request then quotes the last accepted source.
pub fn refine(
    scheme: &dyn EncodingScheme,
    provider: &dyn Provider,
    evaluator: &dyn Evaluator,
    cfg: &RefineConfig,
    state: &mut RefineState,
    persist: &mut dyn FnMut(&RefineState) -> std::io::Result<()>,
) -> Result<(), LlmError> {
    if state.versions.first().and_then(|v| v.record.as_ref()).is_none() {
        return Err(LlmError::Precondition(format!("base `{}` has not been scored", state.base)));
    }
    let prompts = Prompts { deny: scheme.deny_list() };
    while (state.versions.len() as u32) < 1 + cfg.iterations {
        if evaluator.cancelled() {
            return Err(LlmError::Interrupted);
        }
        let v = state.versions.len() as u32 + 1;
        let parent = state.last_accepted().clone();
        let mut request = match state.next {
            Feedback::Start => prompts.refine_start(),
            Feedback::Continue => prompts.refine_continue(),
            Feedback::Bigger => prompts.refine_bigger(),
            Feedback::Revert => prompts.refine_revert(&parent.candidate.source),
        };
        if v >= STRUCTURE_FROM {
            request.push('\n');
            request.push_str(&prompts.structure());
        }
        let mut conversation = state.conversation.clone();
        conversation.push(ChatMessage::user(request));
        let mut session = Session {
            provider,
            stream: format!("refine:{}", state.base),
            calls: state.calls,
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            deny: scheme.deny_list(),
        };
        let reply = session.ask(&conversation)?;
        conversation.push(ChatMessage::assistant(reply.clone()));
        let spec = CandidateSpec::python(
            format!("{}-v{v:02}", state.base),
            extract_code(&reply),
            Origin::Refined(v),
            Some(parent.candidate.id.clone()),
        );
        let first = evaluator.verify(&spec);
        let (spec, rounds, verified) = if first.status.returned() {
            (spec, 0, true)
        } else {
            match repair_loop(&mut session, &mut conversation, &spec, &first, evaluator, &prompts, cfg.max_tries)? {
                RepairOutcome::Fixed { spec, tries, .. } => (spec, tries, true),
                RepairOutcome::GiveUp { tries, .. } => (spec, tries, false),
            }
        };
        let (record, significance) = if verified {
            let record = evaluator.score(&spec)?;
            let prev = parent.record.as_ref().expect("accepted versions are scored");
            let sig = compare_versions(prev, &record);
            (Some(record), Some(sig))
        } else {
            (None, Some(Significance::Worse))
        };
        if evaluator.cancelled() {
            return Err(LlmError::Interrupted);
        }
        let next = match significance {
            Some(Significance::Better) => Feedback::Continue,
            Some(Significance::NoChange) => Feedback::Bigger,
            _ => Feedback::Revert,
        };
        state.versions.push(Version {
            version: v,
            candidate: spec,
            parent: Some(parent.candidate.id.clone()),
            request: state.next,
            repair_rounds: rounds,
            record,
            significance,
            reverted: next == Feedback::Revert,
        });
        state.conversation = conversation;
        state.calls = session.calls;
        state.next = next;
        persist(state)?;
    }
    Ok(())
}
