use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::cnf::{complete_assignment, Assignment};
use crate::encodings::{scheme_by_name, EncodingScheme};
use crate::llm::{Evaluator, LlmError};
use crate::runner::{self, parallel_map, Bundle, CandidateSpec, RunResult};
use crate::scoring::{EvalRecord, InstanceResult, LsSummary, ResultsStore, SatSummary, Split};
use crate::solver::{solve_with_phases, ExternalConfig, ExternalSolver, MiniSolver, PhaseMode, SolverAdapter};

/// Candidate id of solver-alone records.
pub const SOLVER_ALONE: &str = "SAT";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub path: PathBuf,
}

/// Instance files under `paths`, sorted by id (the file name).
pub fn discover_instances(paths: &[PathBuf]) -> Result<Vec<Instance>, String> {
    let mut found: BTreeMap<String, PathBuf> = BTreeMap::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let files: Vec<PathBuf> = if meta.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .filter(|f| !f.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
                .collect();
            v.sort();
            v
        } else {
            vec![p.clone()]
        };
        for f in files {
            let id = f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .ok_or_else(|| format!("{}: no file name", f.display()))?;
            if let Some(prev) = found.insert(id.clone(), f.clone()) {
                return Err(format!(
                    "instance id `{id}` is used by both {} and {}",
                    prev.display(),
                    f.display()
                ));
            }
        }
    }
    Ok(found.into_iter().map(|(id, path)| Instance { id, path }).collect())
}

pub fn adapter_from(spec: &str) -> Result<Box<dyn SolverAdapter>, String> {
    if spec == "mini" {
        return Ok(Box::new(MiniSolver));
    }
    match spec.strip_prefix("external:") {
        Some(path) if !path.is_empty() => Ok(Box::new(ExternalSolver::new(ExternalConfig::new(
            path,
            PhaseMode::PhaseFile,
        )))),
        _ => Err(format!("adapter `{spec}` is neither `mini` nor `external:<path>`")),
    }
}

/// Writes through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `split.json`: the split plus the solver-alone reference runtimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub discarded: Vec<String>,
    pub reference: BTreeMap<String, SatSummary>,
}

impl SplitFile {
    pub fn new(split: Split, reference: BTreeMap<String, SatSummary>) -> Self {
        SplitFile {
            train: split.train,
            test: split.test,
            discarded: split.discarded,
            reference,
        }
    }
}

/// Bundle directory metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleInfo {
    pub scheme: String,
    pub instance: String,
    pub bound: i64,
    pub num_vars: u32,
    pub num_clauses: usize,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub scheme: &'static dyn EncodingScheme,
    pub adapter: Box<dyn SolverAdapter>,
    pub cancel: Arc<AtomicBool>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, cancel: Arc<AtomicBool>) -> Result<Self, String> {
        cfg.validate()?;
        let scheme = scheme_by_name(&cfg.scheme).map_err(|e| e.to_string())?;
        let adapter = adapter_from(&cfg.adapter)?;
        Ok(Pipeline {
            cfg,
            scheme,
            adapter,
            cancel,
        })
    }

    pub fn out(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.cfg.out.join(rel)
    }

    pub fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }

    pub fn bundle_dir(&self, id: &str) -> PathBuf {
        self.out("bundles").join(id)
    }

    /// Encodes `inst` unless its bundle already exists.
    pub fn ensure_bundle(&self, inst: &Instance) -> Result<Bundle> {
        let dir = self.bundle_dir(&inst.id);
        let info = dir.join("bundle.json");
        if info.exists() {
            return Bundle::open(&dir).with_context(|| format!("opening bundle {}", dir.display()));
        }
        let bytes = fs::read(&inst.path).with_context(|| format!("reading {}", inst.path.display()))?;
        let encoded = self
            .scheme
            .encode(&bytes, self.cfg.bounds.get(&inst.id).copied())
            .with_context(|| format!("encoding {}", inst.path.display()))?;
        let bundle = Bundle::write(&dir, &bytes, &encoded.formula, &encoded.varmap)?;
        write_json(
            &info,
            &BundleInfo {
                scheme: self.scheme.name().into(),
                instance: inst.id.clone(),
                bound: encoded.bound,
                num_vars: encoded.formula.num_vars(),
                num_clauses: encoded.formula.num_clauses(),
            },
        )?;
        Ok(bundle)
    }

    pub fn open_bundles(&self, ids: &[String]) -> Result<Vec<(String, Bundle)>> {
        ids.iter()
            .map(|id| {
                let dir = self.bundle_dir(id);
                Bundle::open(&dir)
                    .with_context(|| format!("opening bundle {}", dir.display()))
                    .map(|b| (id.clone(), b))
            })
            .collect()
    }

    pub fn load_split(&self) -> Result<SplitFile> {
        let path = self.out("split.json");
        if !path.exists() {
            bail!("{} does not exist; run `split` first", path.display());
        }
        read_json(&path)
    }

    /// The solver with all-false phases.
    pub fn solver_alone(&self, bundle: &Bundle, limit: f64) -> SatSummary {
        let f = match bundle.formula() {
            Ok(f) => f,
            Err(e) => return SatSummary::failure(e.to_string()),
        };
        let phases = Assignment::filled(f.num_vars(), false);
        match solve_with_phases(&f, &phases, Duration::from_secs_f64(limit), self.adapter.as_ref()) {
            Ok(o) => SatSummary::from_outcome(&o),
            Err(e) => SatSummary::failure(e.to_string()),
        }
    }

    /// Candidate run, completion of its assignment, then the seeded solver.
    pub fn evaluate_pair(&self, c: &CandidateSpec, inst: &str, bundle: &Bundle, soft: f64, hard: f64, sat: f64) -> InstanceResult {
        let run = runner::run(c, bundle, soft, hard, Some(&self.cancel));
        let sat = run.assignment.as_ref().map(|partial| match bundle.formula() {
            Ok(f) => {
                let phases = complete_assignment(&f, partial, false);
                match solve_with_phases(&f, &phases, Duration::from_secs_f64(sat), self.adapter.as_ref()) {
                    Ok(o) => SatSummary::from_outcome(&o),
                    Err(e) => SatSummary::failure(e.to_string()),
                }
            }
            Err(e) => SatSummary::failure(e.to_string()),
        });
        InstanceResult {
            candidate: c.id.clone(),
            instance: inst.to_string(),
            ls: Some(LsSummary::from_run(&run)),
            sat,
        }
    }

    /// Runs every missing `(candidate, instance)` pair and appends it to
    /// `store`. Returns all stored results for the given pairs. Pairs cut
    /// short by cancellation are not stored.
    pub fn evaluate_all(
        &self,
        cands: &[&CandidateSpec],
        bundles: &[(String, Bundle)],
        limits: (f64, f64, f64),
        store: &ResultsStore,
        workers: usize,
    ) -> Result<Vec<InstanceResult>> {
        let done = store.completed()?;
        let todo: Vec<(&CandidateSpec, &str, &Bundle)> = cands
            .iter()
            .flat_map(|c| bundles.iter().map(move |(id, b)| (*c, id.as_str(), b)))
            .filter(|(c, id, _)| !done.contains(&(c.id.clone(), id.to_string())))
            .collect();
        let (soft, hard, sat) = limits;
        let errors: Vec<Option<String>> = parallel_map(&todo, workers, |(c, id, b)| {
            if self.cancelled() {
                return None;
            }
            let r = self.evaluate_pair(c, id, b, soft, hard, sat);
            if self.cancelled() {
                return None;
            }
            log::info!("{} on {}: {}", c.id, id, r.ls.as_ref().map_or("-", |l| l.status.label()));
            store.append(&r).err().map(|e| e.to_string())
        });
        if let Some(e) = errors.into_iter().flatten().next() {
            bail!("writing {}: {e}", store.path().display());
        }
        if self.cancelled() {
            bail!("interrupted");
        }
        let wanted: BTreeSet<(&str, &str)> = cands
            .iter()
            .flat_map(|c| bundles.iter().map(move |(id, _)| (c.id.as_str(), id.as_str())))
            .collect();
        let mut out: Vec<InstanceResult> = store
            .load()?
            .into_iter()
            .filter(|r| wanted.contains(&(r.candidate.as_str(), r.instance.as_str())))
            .collect();
        out.sort_by(|a, b| (&a.candidate, &a.instance).cmp(&(&b.candidate, &b.instance)));
        out.dedup_by(|a, b| a.candidate == b.candidate && a.instance == b.instance);
        Ok(out)
    }

    pub fn candidate_path(&self, id: &str) -> PathBuf {
        self.out("candidates").join(format!("{id}.json"))
    }

    pub fn save_candidate(&self, c: &CandidateSpec) -> io::Result<()> {
        write_json(&self.candidate_path(&c.id), c)?;
        if c.entry.iter().any(|a| a.contains("{source}")) {
            write_atomic(&self.out("candidates").join(format!("{}.py", c.id)), c.source.as_bytes())?;
        }
        Ok(())
    }

    pub fn load_candidate(&self, id: &str) -> Result<CandidateSpec> {
        let path = self.candidate_path(id);
        if !path.exists() {
            bail!("unknown candidate `{id}` ({} is missing)", path.display());
        }
        read_json(&path)
    }

    pub fn load_candidates(&self) -> Result<Vec<CandidateSpec>> {
        let dir = self.out("candidates");
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| read_json(p)).collect()
    }

    /// `lsgen-candidate` next to the running executable unless configured.
    pub fn candidate_exe(&self) -> Result<PathBuf> {
        if let Some(p) = &self.cfg.candidate_exe {
            return Ok(p.clone());
        }
        let exe = std::env::current_exe()?;
        let sibling = exe.with_file_name(format!("lsgen-candidate{}", std::env::consts::EXE_SUFFIX));
        if sibling.exists() {
            Ok(sibling)
        } else {
            Err(anyhow!("{} not found; set candidate_exe", sibling.display()))
        }
    }
}

/// Verification on the easiest training instance and scoring on all of
/// them, with results kept in `results/train.jsonl`.
pub struct TrainingEvaluator<'p> {
    pub pipeline: &'p Pipeline,
    pub easy: Bundle,
    pub train: Vec<(String, Bundle)>,
    pub store: &'p ResultsStore,
    pub workers: usize,
}

impl<'p> TrainingEvaluator<'p> {
    pub fn new(pipeline: &'p Pipeline, store: &'p ResultsStore, workers: usize) -> Result<Self> {
        let split = pipeline.load_split()?;
        let train = pipeline.open_bundles(&split.train)?;
        // The smallest formula verifies fastest and does not depend on timing.
        let mut easy: Option<(usize, &String, &Bundle)> = None;
        for (id, b) in &train {
            let info: BundleInfo = read_json(&pipeline.bundle_dir(id).join("bundle.json"))?;
            if easy.is_none_or(|(c, _, _)| info.num_clauses < c) {
                easy = Some((info.num_clauses, id, b));
            }
        }
        let easy = easy.ok_or_else(|| anyhow!("the training set is empty"))?.2.clone();
        Ok(TrainingEvaluator {
            pipeline,
            easy,
            train,
            store,
            workers,
        })
    }
}

impl Evaluator for TrainingEvaluator<'_> {
    fn verify(&self, c: &CandidateSpec) -> RunResult {
        let t = &self.pipeline.cfg.timeouts;
        runner::run(c, &self.easy, t.verify_soft, t.verify_hard, Some(&self.pipeline.cancel))
    }

    fn score(&self, c: &CandidateSpec) -> Result<EvalRecord, LlmError> {
        self.pipeline
            .save_candidate(c)
            .map_err(LlmError::Io)?;
        let t = &self.pipeline.cfg.timeouts;
        let results = self
            .pipeline
            .evaluate_all(&[c], &self.train, (t.train_soft, t.train_hard, t.train_sat), self.store, self.workers)
            .map_err(|e| {
                if self.cancelled() {
                    LlmError::Interrupted
                } else {
                    LlmError::Evaluation(e.to_string())
                }
            })?;
        Ok(EvalRecord::new(&c.id, results))
    }

    fn cancelled(&self) -> bool {
        self.pipeline.cancelled()
    }
}
