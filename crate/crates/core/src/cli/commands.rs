use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context as _, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Timeouts};
use super::pipeline::{
    discover_instances, read_json, write_atomic, write_json, BundleInfo, Instance, Pipeline, SplitFile,
    TrainingEvaluator, SOLVER_ALONE,
};
use super::CliError;
use crate::llm::{
    self, select_top, template_hashes, GatherState, HttpProvider, LlmError, Provider, Recorder, RefineState, Replayer,
    ScriptedProvider,
};
use crate::runner::{parallel_map, Bundle, CandidateSpec, Origin};
use crate::scoring::{
    class_representatives, group_records, relative_score_table, split_train_test, table1, CandidateInfo, EvalRecord,
    InstanceResult, ResultsStore,
};

pub struct Context {
    pub cfg: RunConfig,
    pub cassette: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub cancel: Arc<AtomicBool>,
}

impl Context {
    fn pipeline(&self) -> Result<Pipeline, CliError> {
        Pipeline::new(self.cfg.clone(), Arc::clone(&self.cancel)).map_err(CliError::Usage)
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

/// Run manifest. Holds no timestamps, absolute output paths, timings or
/// worker counts, so identical inputs give identical bytes.
#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config_sha256: String,
    scheme: &'a str,
    seed: u64,
    adapter: &'a str,
    timeouts: &'a Timeouts,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    prompts: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cassette_sha256: Option<String>,
    details: Value,
}

fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    c.candidate_exe = None;
    c.workers = 0;
    sha256(serde_json::to_string(&c).expect("config serialises").as_bytes())
}

fn write_manifest(ctx: &Context, command: &str, prompts: bool, details: Value) -> Result<()> {
    let cassette_sha256 = match &ctx.cassette {
        Some(p) if prompts => Some(file_sha256(p)?),
        _ => None,
    };
    let m = Manifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(&ctx.cfg),
        scheme: &ctx.cfg.scheme,
        seed: ctx.cfg.seed,
        adapter: &ctx.cfg.adapter,
        timeouts: &ctx.cfg.timeouts,
        prompts: if prompts { template_hashes() } else { BTreeMap::new() },
        cassette_sha256,
        details,
    };
    write_json(&ctx.cfg.out.join(format!("manifest-{command}.json")), &m)?;
    Ok(())
}

pub fn encode(ctx: &Context, instance: &Path, bound: Option<i64>) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    let bytes = fs::read(instance).map_err(|e| CliError::Usage(format!("{}: {e}", instance.display())))?;
    let encoded = p
        .scheme
        .encode(&bytes, bound)
        .with_context(|| format!("{}", instance.display()))?;
    let out = &ctx.cfg.out;
    Bundle::write(out, &bytes, &encoded.formula, &encoded.varmap).with_context(|| format!("writing {}", out.display()))?;
    let id = instance
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let info = BundleInfo {
        scheme: p.scheme.name().into(),
        instance: id,
        bound: encoded.bound,
        num_vars: encoded.formula.num_vars(),
        num_clauses: encoded.formula.num_clauses(),
    };
    write_json(&out.join("bundle.json"), &info).map_err(anyhow::Error::from)?;
    if bound.is_none() {
        println!("bound {} (heuristic)", encoded.bound);
    }
    println!("{} variables, {} clauses", info.num_vars, info.num_clauses);
    write_manifest(
        ctx,
        "encode",
        false,
        json!({
            "instance_sha256": sha256(&bytes),
            "bound": encoded.bound,
            "outputs": {
                "formula.cnf": file_sha256(&out.join(Bundle::CNF))?,
                "varmap.json": file_sha256(&out.join(Bundle::VARMAP))?,
            },
        }),
    )?;
    Ok(())
}

fn instances(p: &Pipeline) -> Result<Vec<Instance>, CliError> {
    if p.cfg.instances.is_empty() {
        return Err(CliError::Usage("no instances configured".into()));
    }
    discover_instances(&p.cfg.instances).map_err(CliError::Usage)
}

fn solver_alone_pass(p: &Pipeline, bundles: &[(String, Bundle)], limit: f64, store: &ResultsStore) -> Result<Vec<InstanceResult>> {
    let done = store.completed()?;
    let todo: Vec<&(String, Bundle)> = bundles
        .iter()
        .filter(|(id, _)| !done.contains(&(SOLVER_ALONE.to_string(), id.clone())))
        .collect();
    let errors: Vec<Option<String>> = parallel_map(&todo, p.cfg.workers, |(id, b)| {
        if p.cancelled() {
            return None;
        }
        let sat = p.solver_alone(b, limit);
        log::info!("solver alone on {id}: {:?} {:.2}s", sat.status, sat.sat_time);
        let r = InstanceResult {
            candidate: SOLVER_ALONE.into(),
            instance: id.clone(),
            ls: None,
            sat: Some(sat),
        };
        store.append(&r).err().map(|e| e.to_string())
    });
    if let Some(e) = errors.into_iter().flatten().next() {
        bail!("writing {}: {e}", store.path().display());
    }
    if p.cancelled() {
        bail!("interrupted");
    }
    let ids: BTreeSet<&str> = bundles.iter().map(|(id, _)| id.as_str()).collect();
    let mut out: Vec<InstanceResult> = store
        .load()?
        .into_iter()
        .filter(|r| r.candidate == SOLVER_ALONE && ids.contains(r.instance.as_str()))
        .collect();
    out.sort_by(|a, b| a.instance.cmp(&b.instance));
    out.dedup_by(|a, b| a.instance == b.instance);
    Ok(out)
}

pub fn split(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    let insts = instances(&p)?;
    let mut bundles = Vec::new();
    let mut inputs = BTreeMap::new();
    let mut bounds = BTreeMap::new();
    for inst in &insts {
        let b = p.ensure_bundle(inst)?;
        let info: BundleInfo = read_json(&p.bundle_dir(&inst.id).join("bundle.json"))?;
        inputs.insert(inst.id.clone(), file_sha256(&inst.path)?);
        bounds.insert(inst.id.clone(), info.bound);
        bundles.push((inst.id.clone(), b));
    }
    let store = ResultsStore::new(p.out("results/reference.jsonl"));
    let results = solver_alone_pass(&p, &bundles, p.cfg.timeouts.reference_sat, &store)?;
    let reference: BTreeMap<String, _> = results
        .into_iter()
        .map(|r| (r.instance, r.sat.expect("solver-alone records have a solver summary")))
        .collect();
    let split = split_train_test(&reference, p.cfg.split);
    println!(
        "{} training, {} test, {} discarded",
        split.train.len(),
        split.test.len(),
        split.discarded.len()
    );
    let file = SplitFile::new(split, reference);
    write_json(&p.out("split.json"), &file).map_err(anyhow::Error::from)?;
    write_manifest(
        ctx,
        "split",
        false,
        json!({
            "instances": inputs,
            "bounds": bounds,
            "thresholds": p.cfg.split,
            "train": file.train,
            "test": file.test,
            "discarded": file.discarded,
        }),
    )?;
    Ok(())
}

pub fn baseline(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    let split = p.load_split().map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let bundles = p.open_bundles(&split.test)?;
    let store = ResultsStore::new(p.out("results/baseline.jsonl"));
    let results = solver_alone_pass(&p, &bundles, p.cfg.timeouts.test_sat, &store)?;
    let solved = EvalRecord::new(SOLVER_ALONE, results).solved().len();
    println!("solver alone: {solved} of {} test instances", split.test.len());
    write_manifest(ctx, "baseline", false, json!({ "test": split.test }))?;
    Ok(())
}

fn providers(ctx: &Context) -> Result<Vec<Box<dyn Provider>>, CliError> {
    if ctx.cfg.providers.is_empty() {
        return Err(CliError::Usage("no providers configured".into()));
    }
    let script = ctx.script.as_deref().map(load_script).transpose()?;
    ctx.cfg
        .providers
        .iter()
        .map(|pc| -> Result<Box<dyn Provider>, CliError> {
            if let Some(c) = &ctx.cassette {
                let r = Replayer::open(c, &pc.name)
                    .map_err(|e| CliError::Usage(format!("cassette {}: {e}", c.display())))?;
                return Ok(Box::new(r));
            }
            if let Some(s) = &script {
                let mut sp = ScriptedProvider::new(&pc.name);
                for (stream, replies) in s.get(&pc.name).cloned().unwrap_or_default() {
                    sp = sp.with_stream(stream, replies);
                }
                return Ok(recorded(ctx, sp));
            }
            let http = HttpProvider::new(pc.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(recorded(ctx, http))
        })
        .collect()
}

fn recorded<P: Provider + 'static>(ctx: &Context, p: P) -> Box<dyn Provider> {
    match &ctx.record {
        Some(path) => Box::new(Recorder::new(p, path)),
        None => Box::new(p),
    }
}

type Script = BTreeMap<String, BTreeMap<String, Vec<String>>>;

fn load_script(path: &Path) -> Result<Script, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn llm_error(e: LlmError) -> CliError {
    CliError::Pipeline(anyhow!(e))
}

fn gather_state_path(p: &Pipeline, provider: &str) -> PathBuf {
    p.out("gather").join(format!("{provider}.json"))
}

fn load_gather_states(p: &Pipeline) -> Result<BTreeMap<String, GatherState>> {
    let mut out = BTreeMap::new();
    for pc in &p.cfg.providers {
        let path = gather_state_path(p, &pc.name);
        if path.exists() {
            out.insert(pc.name.clone(), read_json(&path)?);
        }
    }
    Ok(out)
}

fn source_hashes<'a>(cands: impl IntoIterator<Item = &'a CandidateSpec>) -> BTreeMap<String, String> {
    cands
        .into_iter()
        .map(|c| (c.id.clone(), sha256(c.source.as_bytes())))
        .collect()
}

pub fn gather(ctx: &Context, n: Option<usize>) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    p.load_split().map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let providers = providers(ctx)?;
    let mut cfg = p.cfg.gather.clone();
    if let Some(n) = n {
        cfg.n = n;
    }
    let store = ResultsStore::new(p.out("results/train.jsonl"));
    let evaluator = TrainingEvaluator::new(&p, &store, p.cfg.workers)?;
    let mut details = BTreeMap::new();
    for provider in &providers {
        let path = gather_state_path(&p, provider.name());
        let mut state: GatherState = if path.exists() { read_json(&path)? } else { GatherState::default() };
        let r = llm::gather(p.scheme, provider.as_ref(), &evaluator, &cfg, &mut state, &mut |s| write_json(&path, s));
        r.map_err(llm_error)?;
        println!(
            "{}: {} of {} attempts accepted",
            provider.name(),
            state.accepted().count(),
            state.attempts.len()
        );
        details.insert(
            provider.name().to_string(),
            json!({
                "calls": state.calls,
                "accepted": state.accepted().map(|a| a.candidate.id.clone()).collect::<Vec<_>>(),
                "sources": source_hashes(state.attempts.iter().map(|a| &a.candidate)),
                "repair_rounds": state.attempts.iter().map(|a| (a.candidate.id.clone(), a.repair_rounds)).collect::<BTreeMap<_, _>>(),
            }),
        );
    }
    let provider_cfgs: Vec<Value> = p
        .cfg
        .providers
        .iter()
        .map(|pc| json!({"name": pc.name, "model": pc.model, "endpoint": pc.endpoint, "temperature": pc.temperature}))
        .collect();
    write_manifest(
        ctx,
        "gather",
        true,
        json!({ "gather": cfg, "providers": provider_cfgs, "runs": details }),
    )?;
    Ok(())
}

/// Bases to refine: explicit ids, or the top `k` clean candidates of each
/// provider. Returns `(provider, base, record)` plus selection warnings.
fn refine_bases(
    states: &BTreeMap<String, GatherState>,
    explicit: &[String],
    k: usize,
) -> Result<(Vec<(String, CandidateSpec, EvalRecord)>, Vec<String>), CliError> {
    let mut groups: BTreeMap<String, Vec<(CandidateSpec, EvalRecord)>> = BTreeMap::new();
    for (provider, s) in states {
        let members = s
            .accepted()
            .filter_map(|a| a.record.clone().map(|r| (a.candidate.clone(), r)))
            .collect();
        groups.insert(provider.clone(), members);
    }
    let find = |id: &str| {
        groups.iter().find_map(|(prov, m)| {
            m.iter()
                .find(|(c, _)| c.id == id)
                .map(|(c, r)| (prov.clone(), c.clone(), r.clone()))
        })
    };
    if !explicit.is_empty() {
        let bases = explicit
            .iter()
            .map(|id| find(id).ok_or_else(|| CliError::Usage(format!("`{id}` is not an accepted gathered candidate"))))
            .collect::<Result<_, _>>()?;
        return Ok((bases, Vec::new()));
    }
    let (top, warnings) = select_top(&groups, k).map_err(llm_error)?;
    let bases = top.iter().map(|c| find(&c.id).expect("selected from groups")).collect();
    Ok((bases, warnings))
}

pub fn refine(ctx: &Context, iterations: Option<u32>, k: Option<usize>, explicit: &[String]) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    p.load_split().map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let states = load_gather_states(&p)?;
    if states.is_empty() {
        return Err(CliError::Usage("no gathering state found; run `gather` first".into()));
    }
    let providers = providers(ctx)?;
    let mut cfg = p.cfg.refine.clone();
    if let Some(i) = iterations {
        cfg.iterations = i;
    }
    let (bases, warnings) = refine_bases(&states, explicit, k.unwrap_or(p.cfg.top_k))?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let store = ResultsStore::new(p.out("results/train.jsonl"));
    let inner = (p.cfg.workers / bases.len().max(1)).max(1);
    let evaluator = TrainingEvaluator::new(&p, &store, inner)?;
    let outcomes: Vec<Result<RefineState, CliError>> = parallel_map(&bases, p.cfg.workers, |(prov, base, record)| {
        let provider = providers
            .iter()
            .find(|x| x.name() == prov)
            .ok_or_else(|| CliError::Usage(format!("provider `{prov}` is not configured")))?;
        let path = p.out("refine").join(format!("{}.json", base.id));
        let mut state = if path.exists() {
            read_json(&path)?
        } else {
            RefineState::new(p.scheme, base.clone(), record.clone())
        };
        llm::refine(p.scheme, provider.as_ref(), &evaluator, &cfg, &mut state, &mut |s| write_json(&path, s))
            .map_err(llm_error)?;
        Ok(state)
    });
    let mut chains = BTreeMap::new();
    let mut first_error = None;
    for (o, (_, base, _)) in outcomes.into_iter().zip(&bases) {
        match o {
            Ok(state) => {
                let lineage: Vec<Value> = state
                    .versions
                    .iter()
                    .map(|v| {
                        json!({
                            "id": v.candidate.id,
                            "version": v.version,
                            "parent": v.parent,
                            "request": v.request,
                            "reverted": v.reverted,
                            "source_sha256": sha256(v.candidate.source.as_bytes()),
                        })
                    })
                    .collect();
                println!(
                    "{}: {} versions, {} reverted",
                    base.id,
                    state.versions.len(),
                    state.versions.iter().filter(|v| v.reverted).count()
                );
                chains.insert(base.id.clone(), json!({ "calls": state.calls, "lineage": lineage }));
            }
            Err(e) => {
                eprintln!("refinement of {} failed: {e}", base.id);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    write_manifest(
        ctx,
        "refine",
        true,
        json!({ "refine": cfg, "warnings": warnings, "chains": chains }),
    )?;
    Ok(())
}

/// Version and lineage root of every saved candidate.
fn candidate_infos(cands: &[CandidateSpec]) -> Vec<CandidateInfo> {
    let by_id: BTreeMap<&str, &CandidateSpec> = cands.iter().map(|c| (c.id.as_str(), c)).collect();
    cands
        .iter()
        .map(|c| {
            let mut root = c;
            let mut hops = 0;
            while let (Origin::Refined(_), Some(parent)) = (&root.origin, root.lineage.as_deref()) {
                match by_id.get(parent) {
                    Some(p) if hops < 64 => {
                        root = p;
                        hops += 1;
                    }
                    _ => break,
                }
            }
            CandidateInfo {
                id: c.id.clone(),
                root: root.id.clone(),
                version: c.version().unwrap_or(1),
            }
        })
        .collect()
}

/// Training records that cover the whole training set.
fn complete_train_records(p: &Pipeline, train_ids: &[String]) -> Result<Vec<EvalRecord>> {
    let want: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    let store = ResultsStore::new(p.out("results/train.jsonl"));
    let rows = store.load()?.into_iter().filter(|r| want.contains(r.instance.as_str()));
    Ok(group_records(rows).into_iter().filter(|r| r.instances() == want).collect())
}

pub fn evaluate(ctx: &Context, explicit: &[String], builtins: &[String], all_versions: bool) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    let split = p.load_split().map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let mut cands: Vec<CandidateSpec> = Vec::new();
    if explicit.is_empty() {
        let saved = p.load_candidates()?;
        let generated: Vec<CandidateSpec> = saved.into_iter().filter(|c| c.origin != Origin::Builtin).collect();
        let refine_dir = p.out("refine");
        let refined_roots: BTreeSet<String> = if refine_dir.exists() {
            fs::read_dir(&refine_dir)
                .map_err(anyhow::Error::from)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .collect()
        } else {
            BTreeSet::new()
        };
        let infos = candidate_infos(&generated);
        let wanted_root = |root: &str| refined_roots.is_empty() || refined_roots.contains(root);
        let mut chosen = BTreeSet::new();
        if all_versions {
            chosen.extend(infos.iter().filter(|i| wanted_root(&i.root)).map(|i| i.id.clone()));
        } else {
            let train = complete_train_records(&p, &split.train)?;
            let reps = class_representatives(&infos, &train).map_err(anyhow::Error::from)?;
            for (root, cells) in reps {
                if wanted_root(&root) {
                    chosen.extend(cells.into_iter().flatten());
                }
            }
        }
        cands.extend(generated.into_iter().filter(|c| chosen.contains(&c.id)));
    } else {
        for id in explicit {
            cands.push(p.load_candidate(id).map_err(|e| CliError::Usage(format!("{e:#}")))?);
        }
    }
    let mut names: Vec<String> = p.cfg.builtins.clone();
    names.extend(builtins.iter().cloned());
    names.sort();
    names.dedup();
    if !names.is_empty() {
        let exe = p.candidate_exe().map_err(|e| CliError::Usage(format!("{e:#}")))?;
        for algo in &names {
            if !super::BUILTIN_ALGOS.contains(&algo.as_str()) {
                return Err(CliError::Usage(format!("unknown built-in search `{algo}`")));
            }
            let c = CandidateSpec::builtin(algo, &exe);
            p.save_candidate(&c).map_err(anyhow::Error::from)?;
            cands.push(c);
        }
    }
    if cands.is_empty() {
        return Err(CliError::Usage("nothing to evaluate".into()));
    }
    let bundles = p.open_bundles(&split.test)?;
    let store = ResultsStore::new(p.out("results/test.jsonl"));
    let t = &p.cfg.timeouts;
    let refs: Vec<&CandidateSpec> = cands.iter().collect();
    let results = p.evaluate_all(&refs, &bundles, (t.test_soft, t.test_hard, t.test_sat), &store, p.cfg.workers)?;
    for rec in group_records(results) {
        println!("{}: solved {} of {}", rec.candidate, rec.solved().len(), split.test.len());
    }
    write_manifest(
        ctx,
        "evaluate",
        false,
        json!({ "test": split.test, "candidates": source_hashes(&cands) }),
    )?;
    Ok(())
}

fn load_records(p: &Pipeline, name: &str) -> Result<Vec<EvalRecord>> {
    Ok(group_records(ResultsStore::new(p.out(format!("results/{name}.jsonl"))).load()?))
}

pub fn report(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.pipeline()?;
    let train_ids = match p.load_split() {
        Ok(s) => s.train,
        Err(_) => Vec::new(),
    };
    let cands = p.load_candidates()?;
    let infos = candidate_infos(&cands);
    let train = complete_train_records(&p, &train_ids)?;
    let test = load_records(&p, "test")?;
    let baseline = load_records(&p, "baseline")?
        .into_iter()
        .find(|r| r.candidate == SOLVER_ALONE)
        .unwrap_or_else(|| EvalRecord::new(SOLVER_ALONE, Vec::new()));
    let (_, t1) = table1(&infos, &train, &test, &baseline).map_err(anyhow::Error::from)?;
    let rel = relative_score_table(&train, &test);
    let text = t1.to_text();
    print!("{text}");
    let outputs = [
        ("report.txt", text),
        ("report.csv", t1.to_csv()),
        ("scores.txt", rel.to_text()),
        ("scores.csv", rel.to_csv()),
    ];
    for (name, body) in &outputs {
        write_atomic(&p.out(name), body.as_bytes()).map_err(anyhow::Error::from)?;
    }
    // Scores depend on measured times, so outputs are listed but not hashed.
    let names: Vec<&str> = outputs.iter().map(|(n, _)| *n).collect();
    write_manifest(ctx, "report", false, json!({ "outputs": names }))?;
    Ok(())
}
