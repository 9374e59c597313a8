use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;

use super::*;
use crate::encodings::{scheme_by_name, schemes, EncodingScheme};
use crate::runner::{Origin, RunStatus};
use crate::scoring::{InstanceResult, LsSummary, SatStatus, SatSummary, Significance};

/// Verifies by markers in the source: `BROKEN` fails with a located error,
/// `HANG` times out. Scores one instance whose solver time is `# time=X`.
#[derive(Default)]
struct MockEvaluator {
    verifies: AtomicUsize,
    scores: AtomicUsize,
}

fn program(tag: &str, time: f64) -> String {
    format!("```python\n# {tag}\n# time={time}\nprint('1 0')\n```")
}

fn broken(tag: &str) -> String {
    format!("```python\n# {tag}\nBROKEN\n```")
}

impl Evaluator for MockEvaluator {
    fn verify(&self, c: &CandidateSpec) -> RunResult {
        self.verifies.fetch_add(1, Ordering::SeqCst);
        let status = if c.source.contains("BROKEN") {
            RunStatus::RuntimeError {
                message: "NameError: name 'BROKEN' is not defined".into(),
                line: Some(2),
            }
        } else if c.source.contains("HANG") {
            RunStatus::HardTimeout
        } else {
            RunStatus::Ok
        };
        RunResult {
            assignment: None,
            status,
            wall_time: 0.1,
        }
    }

    fn score(&self, c: &CandidateSpec) -> Result<EvalRecord, LlmError> {
        self.scores.fetch_add(1, Ordering::SeqCst);
        let time = c
            .source
            .lines()
            .find_map(|l| l.strip_prefix("# time="))
            .map_or(10.0, |t| t.trim().parse().expect("numeric time"));
        Ok(EvalRecord::new(
            &c.id,
            vec![InstanceResult {
                candidate: c.id.clone(),
                instance: "i1".into(),
                ls: Some(LsSummary {
                    status: RunStatus::Ok,
                    ls_time: 0.1,
                }),
                sat: Some(SatSummary {
                    status: SatStatus::Sat,
                    sat_time: time,
                    stats: None,
                    error: None,
                }),
            }],
        ))
    }
}

fn coloring() -> &'static dyn EncodingScheme {
    scheme_by_name("coloring").expect("registered")
}

fn run_gather(p: &dyn Provider, cfg: &GatherConfig) -> (Result<(), LlmError>, GatherState, MockEvaluator) {
    let ev = MockEvaluator::default();
    let mut state = GatherState::default();
    let r = gather(coloring(), p, &ev, cfg, &mut state, &mut |_| Ok(()));
    (r, state, ev)
}

fn small(n: usize) -> GatherConfig {
    GatherConfig {
        n,
        ..GatherConfig::default()
    }
}

#[test]
fn gather_three_valid_programs() {
    let p = ScriptedProvider::new("mock").with_stream(
        "gather:mock",
        vec![program("a", 1.0), program("b", 2.0), program("c", 3.0)],
    );
    let (r, state, ev) = run_gather(&p, &small(3));
    r.unwrap();
    assert_eq!(state.accepted().count(), 3);
    assert!(state.attempts.iter().all(|a| a.repair_rounds == 0 && a.record.is_some()));
    assert_eq!(state.calls, 3);
    assert_eq!(ev.scores.load(Ordering::SeqCst), 3);
    let ids: Vec<&str> = state.attempts.iter().map(|a| a.candidate.id.as_str()).collect();
    assert_eq!(ids, ["mock-g01", "mock-g02", "mock-g03"]);

    let reqs = p.requests();
    let temps: Vec<f64> = reqs.iter().map(|(_, r)| r.temperature).collect();
    assert_eq!(temps, [0.7, 0.95, 1.2]);
    let user = |i: usize| reqs[i].1.messages[1].content.clone();
    assert!(user(0).contains(coloring().source_text().trim_end()));
    assert!(!user(0).contains("# a"));
    assert!(user(1).contains("# a") && !user(1).contains("# b"));
    assert!(user(2).contains("# a") && user(2).contains("# b"));
    for (_, req) in &reqs {
        assert_eq!(req.messages.len(), 2);
        assert_eq!(req.messages[0].role, Role::System);
    }
}

#[test]
fn gather_repairs_a_broken_program() {
    let p = ScriptedProvider::new("mock").with_stream("gather:mock", vec![broken("x"), program("x", 1.0)]);
    let (r, state, _) = run_gather(&p, &small(1));
    r.unwrap();
    assert_eq!(state.attempts.len(), 1);
    assert!(state.attempts[0].accepted);
    assert_eq!(state.attempts[0].repair_rounds, 1);
    let reqs = p.requests();
    assert_eq!(reqs.len(), 2);
    let repair = &reqs[1].1.messages;
    assert_eq!(repair.len(), 4);
    let last = &repair[3].content;
    assert!(last.contains("NameError: name 'BROKEN' is not defined"), "{last}");
    assert!(last.contains("Line: 2"));
    assert_eq!(repair[2].role, Role::Assistant);
}

#[test]
fn gather_aborts_when_provider_keeps_failing() {
    let cfg = ProviderConfig {
        name: "down".into(),
        endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
        model: "m".into(),
        temperature: 0.7,
        max_tokens: 16,
        api_key_env: None,
        retry: RetryPolicy {
            max_retries: 2,
            backoff_ms: 1,
        },
        timeout_secs: 5,
    };
    let p = HttpProvider::new(cfg).unwrap();
    let (r, state, ev) = run_gather(&p, &small(1));
    assert!(matches!(r, Err(LlmError::Provider { .. })), "{r:?}");
    assert!(state.attempts.is_empty());
    assert_eq!(ev.verifies.load(Ordering::SeqCst), 0);
}

#[test]
fn scripted_failures_surface_as_provider_errors() {
    let p = ScriptedProvider::new("mock").with_failures("gather:mock", vec!["quota".to_string()]);
    let (r, state, _) = run_gather(&p, &small(1));
    assert!(matches!(r, Err(LlmError::Provider { ref message, .. }) if message == "quota"));
    assert!(state.attempts.is_empty());
}

fn repair_fixture(replies: Vec<String>, max_tries: u32) -> (Result<RepairOutcome, LlmError>, usize) {
    let p = ScriptedProvider::new("mock").with_stream("s", replies);
    let ev = MockEvaluator::default();
    let prompts = Prompts { deny: coloring().deny_list() };
    let mut session = Session {
        provider: &p,
        stream: "s".into(),
        calls: 0,
        temperature: 0.7,
        max_tokens: 100,
        deny: coloring().deny_list(),
    };
    let spec = CandidateSpec::python("c", "BROKEN", Origin::Base, None);
    let failure = ev.verify(&spec);
    let mut conv = vec![ChatMessage::user("go"), ChatMessage::assistant("BROKEN")];
    let r = repair_loop(&mut session, &mut conv, &spec, &failure, &ev, &prompts, max_tries);
    (r, p.requests().len())
}

#[test]
fn repair_fixed_on_second_try() {
    let (r, calls) = repair_fixture(vec![broken("1"), program("2", 1.0)], 10);
    match r.unwrap() {
        RepairOutcome::Fixed { spec, tries, status } => {
            assert_eq!(tries, 2);
            assert_eq!(status, RunStatus::Ok);
            assert!(spec.source.contains("# 2"));
            assert_eq!(spec.id, "c");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(calls, 2);
}

#[test]
fn repair_gives_up_after_max_tries() {
    let (r, calls) = repair_fixture((0..12).map(|i| broken(&i.to_string())).collect(), 10);
    assert!(matches!(r.unwrap(), RepairOutcome::GiveUp { tries: 10, .. }));
    assert_eq!(calls, 10);
}

#[test]
fn repair_rejects_passing_candidate() {
    let p = ScriptedProvider::new("mock");
    let ev = MockEvaluator::default();
    let prompts = Prompts { deny: &[] };
    let mut session = Session {
        provider: &p,
        stream: "s".into(),
        calls: 0,
        temperature: 0.7,
        max_tokens: 100,
        deny: &[],
    };
    let spec = CandidateSpec::python("c", "ok", Origin::Base, None);
    let ok = ev.verify(&spec);
    let r = repair_loop(&mut session, &mut Vec::new(), &spec, &ok, &ev, &prompts, 10);
    assert!(matches!(r, Err(LlmError::Precondition(_))));
    assert!(p.requests().is_empty());
}

fn base_state(ev: &MockEvaluator) -> RefineState {
    let base = CandidateSpec::python("mock-g01", "# base\n# time=100\n", Origin::Base, None);
    let record = ev.score(&base).unwrap();
    RefineState::new(coloring(), base, record)
}

fn run_refine(replies: Vec<String>, iterations: u32) -> (RefineState, Vec<(CallId, ChatRequest)>) {
    let p = ScriptedProvider::new("mock").with_stream("refine:mock-g01", replies);
    let ev = MockEvaluator::default();
    let mut state = base_state(&ev);
    let cfg = RefineConfig {
        iterations,
        ..RefineConfig::default()
    };
    refine(coloring(), &p, &ev, &cfg, &mut state, &mut |_| Ok(())).unwrap();
    (state, p.requests())
}

#[test]
fn refine_monotone_improvements() {
    let replies: Vec<String> = (2..=20)
        .map(|v| program(&format!("v{v}"), 100.0 * 0.8f64.powi(v - 1)))
        .collect();
    let (state, reqs) = run_refine(replies, 19);
    assert_eq!(state.versions.len(), 20);
    for (i, v) in state.versions.iter().enumerate() {
        assert_eq!(v.version, i as u32 + 1);
        assert!(!v.reverted);
        if i > 0 {
            assert_eq!(v.significance, Some(Significance::Better));
            assert_eq!(v.parent.as_deref(), Some(state.versions[i - 1].candidate.id.as_str()));
            let expected = if i == 1 { Feedback::Start } else { Feedback::Continue };
            assert_eq!(v.request, expected);
            let origin = v.candidate.origin.clone();
            assert_eq!(origin, Origin::Refined(v.version));
        }
    }
    assert_eq!(reqs.len(), 19);
    for (k, (id, req)) in reqs.iter().enumerate() {
        let v = k as u32 + 2;
        assert_eq!(id.index, k as u64);
        let last = &req.messages.last().unwrap().content;
        let prompts = Prompts { deny: &[] };
        assert_eq!(last.contains(prompts.structure().trim()), v >= STRUCTURE_FROM, "v{v}");
        if v > 2 {
            assert!(last.starts_with(prompts.refine_continue().trim()));
        }
    }
}

#[test]
fn refine_reverts_after_worse_version() {
    let replies = vec![program("v2", 50.0), program("v3", 80.0), program("v4", 40.0)];
    let (state, reqs) = run_refine(replies, 3);
    let v = &state.versions;
    assert_eq!(v.len(), 4);
    assert_eq!(v[1].significance, Some(Significance::Better));
    assert_eq!(v[2].significance, Some(Significance::Worse));
    assert!(v[2].reverted);
    assert_eq!(v[3].parent.as_deref(), Some("mock-g01-v02"));
    assert_eq!(v[3].request, Feedback::Revert);
    assert_eq!(v[3].significance, Some(Significance::Better));
    let prompt = &reqs[2].1.messages.last().unwrap().content;
    assert!(prompt.contains("Revert to the previous version"));
    assert!(prompt.contains("# v2\n# time=50"));
    assert!(!prompt.contains("# v3"));
}

#[test]
fn refine_no_change_asks_for_bigger_change() {
    let (state, reqs) = run_refine(vec![program("v2", 95.0), program("v3", 90.0)], 2);
    assert_eq!(state.versions[1].significance, Some(Significance::NoChange));
    assert!(!state.versions[1].reverted);
    assert_eq!(state.versions[2].request, Feedback::Bigger);
    assert!(reqs[1].1.messages.last().unwrap().content.contains("bigger change"));
}

#[test]
fn refine_zero_iterations_is_just_the_base() {
    let (state, reqs) = run_refine(vec![], 0);
    assert_eq!(state.versions.len(), 1);
    assert!(reqs.is_empty());
}

#[test]
fn refine_give_up_counts_as_worse() {
    let mut script: Vec<String> = (0..4).map(|i| broken(&format!("b{i}"))).collect();
    script.push(program("v3", 10.0));
    let p = ScriptedProvider::new("mock").with_stream("refine:mock-g01", script);
    let ev = MockEvaluator::default();
    let mut state = base_state(&ev);
    let cfg = RefineConfig {
        iterations: 2,
        max_tries: 3,
        ..RefineConfig::default()
    };
    refine(coloring(), &p, &ev, &cfg, &mut state, &mut |_| Ok(())).unwrap();
    let v = &state.versions;
    assert!(v[1].record.is_none() && v[1].reverted);
    assert_eq!(v[1].repair_rounds, 3);
    assert_eq!(v[2].parent.as_deref(), Some("mock-g01"));
    assert_eq!(v[2].request, Feedback::Revert);
    assert_eq!(state.calls, 5);
}

#[test]
fn refine_resumes_after_provider_failure() {
    let replies = vec![program("v2", 50.0), program("v3", 40.0), program("v4", 30.0)];
    let short = ScriptedProvider::new("mock").with_stream("refine:mock-g01", replies[..1].to_vec());
    let ev = MockEvaluator::default();
    let mut state = base_state(&ev);
    let cfg = RefineConfig {
        iterations: 3,
        ..RefineConfig::default()
    };
    let mut saved = Vec::new();
    let r = refine(coloring(), &short, &ev, &cfg, &mut state, &mut |s| {
        saved.push(s.versions.len());
        Ok(())
    });
    assert!(matches!(r, Err(LlmError::Provider { .. })));
    assert_eq!(state.versions.len(), 2);
    assert_eq!(saved, [2]);

    let full = ScriptedProvider::new("mock").with_stream("refine:mock-g01", replies.clone());
    refine(coloring(), &full, &ev, &cfg, &mut state, &mut |_| Ok(())).unwrap();
    let (uninterrupted, _) = run_refine(replies, 3);
    assert_eq!(state, uninterrupted);
}

#[test]
fn refine_requires_scored_base() {
    let ev = MockEvaluator::default();
    let mut state = base_state(&ev);
    state.versions[0].record = None;
    let p = ScriptedProvider::new("mock");
    let r = refine(coloring(), &p, &ev, &RefineConfig::default(), &mut state, &mut |_| Ok(()));
    assert!(matches!(r, Err(LlmError::Precondition(_))));
}

fn group(provider: &str, clean: usize, errored: usize) -> Vec<(CandidateSpec, EvalRecord)> {
    let ev = MockEvaluator::default();
    let mut out = Vec::new();
    for i in 0..clean + errored {
        let id = format!("{provider}-g{:02}", i + 1);
        let spec = CandidateSpec::python(&id, format!("# time={}\n", 10 - i), Origin::Base, None);
        let mut rec = ev.score(&spec).unwrap();
        if i >= clean {
            rec.had_runtime_error = true;
        }
        out.push((spec, rec));
    }
    out
}

#[test]
fn select_top_per_provider() {
    let groups = BTreeMap::from([("a".to_string(), group("a", 7, 0))]);
    let (top, warnings) = select_top(&groups, 5).unwrap();
    let ids: Vec<&str> = top.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["a-g07", "a-g06", "a-g05", "a-g04", "a-g03"]);
    assert!(warnings.is_empty());

    let groups = BTreeMap::from([("a".to_string(), group("a", 3, 4))]);
    let (top, warnings) = select_top(&groups, 5).unwrap();
    assert_eq!(top.len(), 3);
    assert_eq!(warnings.len(), 1);

    let groups = BTreeMap::from([("a".to_string(), group("a", 6, 0)), ("b".to_string(), group("b", 8, 1))]);
    let (top, warnings) = select_top(&groups, 5).unwrap();
    assert_eq!(top.len(), 10);
    assert_eq!(top.iter().filter(|c| c.id.starts_with("b-")).count(), 5);
    assert!(warnings.is_empty());

    let groups = BTreeMap::from([
        ("a".to_string(), group("a", 5, 0)),
        ("b".to_string(), group("b", 5, 0)),
        ("c".to_string(), group("c", 5, 0)),
    ]);
    assert_eq!(select_top(&groups, 5).unwrap().0.len(), 15);
}

#[test]
fn record_then_replay_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cassette = dir.path().join("c.jsonl");
    let scripted = ScriptedProvider::new("mock").with_stream(
        "gather:mock",
        vec![broken("a"), program("a", 1.0), program("b", 2.0)],
    );
    let recorder = Recorder::new(scripted, &cassette);
    let (r, recorded, _) = run_gather(&recorder, &small(2));
    r.unwrap();

    let replay = Replayer::open(&cassette, "mock").unwrap();
    assert_eq!(replay.len(), 3);
    let (r, replayed, _) = run_gather(&replay, &small(2));
    r.unwrap();
    assert_eq!(
        serde_json::to_string(&recorded).unwrap(),
        serde_json::to_string(&replayed).unwrap()
    );

    // A different schedule changes the first request.
    let cfg = GatherConfig {
        temp_start: 0.5,
        ..small(2)
    };
    let (r, _, _) = run_gather(&replay, &cfg);
    assert!(matches!(r, Err(LlmError::ReplayMismatch { index: 0, .. })), "{r:?}");

    // More attempts than recorded.
    let (r, _, _) = run_gather(&replay, &small(3));
    assert!(matches!(r, Err(LlmError::ReplayMismatch { .. }) | Err(LlmError::ReplayExhausted { .. })));
}

#[test]
fn context_overflow_summarizes_oldest_first() {
    let long = |tag: &str| format!("```python\n# strategy {tag}\n{}\n```", "x = 1\n".repeat(50));
    let p = ScriptedProvider::new("mock").with_stream("gather:mock", vec![long("a"), long("b"), long("c")]);
    let cfg = GatherConfig {
        max_context_chars: 500,
        ..small(3)
    };
    let (r, _, _) = run_gather(&p, &cfg);
    r.unwrap();
    let reqs = p.requests();
    let third = &reqs[2].1.messages[1].content;
    assert!(third.contains("- mock-g01: strategy a"), "{third}");
    assert!(third.contains("### mock-g02"));
    assert!(!third.contains("### mock-g01"));
}

#[test]
fn templates_name_no_problem() {
    let all: Vec<&str> = schemes().iter().flat_map(|s| s.deny_list().iter().copied()).collect();
    let p = Prompts { deny: &[] };
    let rendered = [
        p.system(),
        p.repair("e", Some(1)),
        p.refine_start(),
        p.refine_continue(),
        p.refine_bigger(),
        p.refine_revert("src"),
        p.structure(),
    ];
    for text in &rendered {
        assert_eq!(contains_denied(text, &all), None, "{text}");
    }
    for s in schemes() {
        let g = Prompts { deny: s.deny_list() }.gather(s.source_text(), &[]);
        assert_eq!(contains_denied(&g, s.deny_list()), None, "{}", s.name());
    }
    assert_eq!(template_hashes().len(), TEMPLATE_NAMES.len());
}

#[test]
fn model_text_is_masked_before_quoting() {
    let p = ScriptedProvider::new("mock").with_stream(
        "gather:mock",
        vec![program("greedy Colouring of vertices", 1.0), program("b", 1.0)],
    );
    let (r, state, _) = run_gather(&p, &small(2));
    r.unwrap();
    assert!(state.attempts[0].candidate.source.contains("Colouring"));
    let second = &p.requests()[1].1.messages[1].content;
    assert!(second.contains("greedy [redacted] of vertices"));
}

#[test]
fn session_rejects_denied_words() {
    let p = ScriptedProvider::new("mock").with_stream("s", vec!["x".to_string()]);
    let mut session = Session {
        provider: &p,
        stream: "s".into(),
        calls: 0,
        temperature: 0.7,
        max_tokens: 10,
        deny: coloring().deny_list(),
    };
    let r = session.ask(&[ChatMessage::user("a graph COLORING problem")]);
    assert!(matches!(r, Err(LlmError::Hygiene(_, ref w)) if w == "coloring"));
    assert!(p.requests().is_empty());
    assert!(session.ask(&[ChatMessage::user("x"), ChatMessage::assistant("color")]).is_ok());
}

#[test]
fn extract_code_variants() {
    assert_eq!(extract_code("Here:\n```python\nprint(1)\n```\nDone"), "print(1)\n");
    assert_eq!(extract_code("```\na\n```\n```py\nlonger\nblock\n```"), "longer\nblock\n");
    assert_eq!(extract_code("print(2)"), "print(2)\n");
    assert_eq!(extract_code("```python\nunterminated\n"), "unterminated\n");
}

#[test]
fn provider_config_never_holds_the_key() {
    let cfg: ProviderConfig = serde_json::from_str(
        r#"{"name":"o","endpoint":"http://x","model":"gpt-4o-2024-11-20","api_key_env":"OPENAI_API_KEY"}"#,
    )
    .unwrap();
    assert_eq!(cfg.temperature, 0.7);
    let json = serde_json::to_string(&cfg).unwrap();
    assert!(json.contains("OPENAI_API_KEY"));
    let bad = ProviderConfig { temperature: -0.1, ..cfg };
    assert!(bad.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Calls never exceed n·(1+max_tries) whatever mix of broken programs
    /// the model returns.
    #[test]
    fn gather_budget(n in 1usize..5, max_tries in 0u32..4, pattern in prop::collection::vec(any::<bool>(), 0..40)) {
        let replies: Vec<String> = pattern
            .iter()
            .enumerate()
            .map(|(i, ok)| if *ok { program(&i.to_string(), 1.0) } else { broken(&i.to_string()) })
            .collect();
        let p = ScriptedProvider::new("mock").with_stream("gather:mock", replies);
        let cfg = GatherConfig { n, max_tries, ..GatherConfig::default() };
        let (r, state, _) = run_gather(&p, &cfg);
        let calls = p.requests().len();
        prop_assert!(calls <= n * (1 + max_tries as usize));
        if r.is_ok() {
            prop_assert_eq!(state.attempts.len(), n);
            prop_assert_eq!(state.calls as usize, calls);
        }
    }

    #[test]
    fn refine_budget_and_lineage(iterations in 0u32..6, max_tries in 0u32..3, times in prop::collection::vec(prop::option::of(1.0f64..200.0), 0..30)) {
        let replies: Vec<String> = times
            .iter()
            .enumerate()
            .map(|(i, t)| match t { Some(t) => program(&i.to_string(), *t), None => broken(&i.to_string()) })
            .collect();
        let p = ScriptedProvider::new("mock").with_stream("refine:mock-g01", replies);
        let ev = MockEvaluator::default();
        let mut state = base_state(&ev);
        let cfg = RefineConfig { iterations, max_tries, ..RefineConfig::default() };
        let _ = refine(coloring(), &p, &ev, &cfg, &mut state, &mut |_| Ok(()));
        prop_assert!(p.requests().len() <= iterations as usize * (1 + max_tries as usize));
        let ids: Vec<String> = state.versions.iter().map(|v| v.candidate.id.clone()).collect();
        for (i, v) in state.versions.iter().enumerate().skip(1) {
            let parent = v.parent.as_ref().unwrap();
            let pi = ids.iter().position(|x| x == parent).unwrap();
            prop_assert!(pi < i);
            prop_assert!(!state.versions[pi].reverted);
            let last_ok = state.versions[..i].iter().rposition(|x| !x.reverted).unwrap();
            prop_assert_eq!(pi, last_ok);
        }
    }
}
