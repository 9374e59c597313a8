//! Ranking of local searches, relative scores, refinement significance and
//! the train/test split.

mod report;
mod store;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{RunResult, RunStatus};
use crate::solver::{SolveOutcome, SolveStatus, SolverStats};

pub use report::{class_representatives, relative_score_table, table1, CandidateInfo, ReportTable, Table1Row, RELATIVE_HEADER, TABLE1_HEADER};
pub use store::ResultsStore;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("records cover different instance sets: `{0}` differs from `{1}`")]
    MismatchedInstances(String, String),
}

/// Rounds seconds to two decimals, the precision of persisted records.
pub fn round2(seconds: f64) -> f64 {
    (seconds * 100.0).round() / 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsSummary {
    #[serde(flatten)]
    pub status: RunStatus,
    pub ls_time: f64,
}

impl LsSummary {
    pub fn from_run(r: &RunResult) -> Self {
        LsSummary {
            status: r.status.clone(),
            ls_time: round2(r.wall_time),
        }
    }

    pub fn returned(&self) -> bool {
        self.status.returned()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SatStatus {
    Sat,
    Unsat,
    Timeout,
    /// Backend failure; counted like a timeout.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatSummary {
    pub status: SatStatus,
    pub sat_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SolverStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SatSummary {
    pub fn from_outcome(o: &SolveOutcome) -> Self {
        SatSummary {
            status: match o.status {
                SolveStatus::Sat(_) => SatStatus::Sat,
                SolveStatus::Unsat => SatStatus::Unsat,
                SolveStatus::Timeout => SatStatus::Timeout,
            },
            sat_time: round2(o.runtime),
            stats: o.stats,
            error: None,
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        SatSummary {
            status: SatStatus::Error,
            sat_time: 0.0,
            stats: None,
            error: Some(message.into()),
        }
    }

    /// Finished with SAT or UNSAT.
    pub fn ok(&self) -> bool {
        matches!(self.status, SatStatus::Sat | SatStatus::Unsat)
    }
}

/// Outcome of one candidate on one instance. `ls` is `None` for solver-only
/// reference runs; `sat` is `None` when the search returned nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub candidate: String,
    pub instance: String,
    pub ls: Option<LsSummary>,
    pub sat: Option<SatSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub candidate: String,
    pub results: Vec<InstanceResult>,
    pub had_runtime_error: bool,
    pub ls_timeouts: usize,
    pub sat_timeouts: usize,
    /// Mean solver time over SAT/UNSAT calls; `None` when there were none.
    pub avg_ok_runtime: Option<f64>,
}

impl EvalRecord {
    /// Aggregates `results`, sorted by instance id.
    pub fn new(candidate: impl Into<String>, mut results: Vec<InstanceResult>) -> Self {
        results.sort_by(|a, b| a.instance.cmp(&b.instance));
        let had_runtime_error = results.iter().any(|r| {
            r.ls
                .as_ref()
                .is_some_and(|l| matches!(l.status, RunStatus::RuntimeError { .. } | RunStatus::InvalidOutput { .. }))
        });
        let ls_timeouts = results
            .iter()
            .filter(|r| r.ls.as_ref().is_some_and(|l| l.status == RunStatus::HardTimeout))
            .count();
        let sat_timeouts = results
            .iter()
            .filter(|r| r.sat.as_ref().is_some_and(|s| !s.ok()))
            .count();
        let ok: Vec<f64> = results
            .iter()
            .filter_map(|r| r.sat.as_ref().filter(|s| s.ok()).map(|s| s.sat_time))
            .collect();
        let avg_ok_runtime = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        EvalRecord {
            candidate: candidate.into(),
            results,
            had_runtime_error,
            ls_timeouts,
            sat_timeouts,
            avg_ok_runtime,
        }
    }

    pub fn key(&self) -> RankKey {
        RankKey {
            tier: u8::from(self.had_runtime_error),
            ls_timeouts: self.ls_timeouts,
            sat_timeouts: self.sat_timeouts,
            avg_ok_runtime: self.avg_ok_runtime.unwrap_or(f64::INFINITY),
        }
    }

    pub fn instances(&self) -> BTreeSet<&str> {
        self.results.iter().map(|r| r.instance.as_str()).collect()
    }

    /// Instances solved with status SAT.
    pub fn solved(&self) -> BTreeSet<&str> {
        self.results
            .iter()
            .filter(|r| r.sat.as_ref().is_some_and(|s| s.status == SatStatus::Sat))
            .map(|r| r.instance.as_str())
            .collect()
    }
}

/// Groups per-instance results by candidate.
pub fn group_records(results: impl IntoIterator<Item = InstanceResult>) -> Vec<EvalRecord> {
    let mut by: BTreeMap<String, Vec<InstanceResult>> = BTreeMap::new();
    for r in results {
        by.entry(r.candidate.clone()).or_default().push(r);
    }
    by.into_iter().map(|(c, rs)| EvalRecord::new(c, rs)).collect()
}

/// Lower is better: tier (1 = had a runtime error), then LS timeouts, SAT
/// timeouts and average successful solver time (`inf` when undefined).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankKey {
    pub tier: u8,
    pub ls_timeouts: usize,
    pub sat_timeouts: usize,
    pub avg_ok_runtime: f64,
}

impl RankKey {
    pub fn cmp(&self, other: &RankKey) -> Ordering {
        self.tier
            .cmp(&other.tier)
            .then(self.ls_timeouts.cmp(&other.ls_timeouts))
            .then(self.sat_timeouts.cmp(&other.sat_timeouts))
            .then(self.avg_ok_runtime.total_cmp(&other.avg_ok_runtime))
    }
}

/// Best first; ties broken by candidate id.
pub fn rank(records: &[EvalRecord]) -> Result<Vec<&EvalRecord>, ScoringError> {
    if let Some(first) = records.first() {
        let expect = first.instances();
        for r in &records[1..] {
            if r.instances() != expect {
                return Err(ScoringError::MismatchedInstances(r.candidate.clone(), first.candidate.clone()));
            }
        }
    }
    let mut out: Vec<&EvalRecord> = records.iter().collect();
    out.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.candidate.cmp(&b.candidate)));
    Ok(out)
}

/// Per candidate: fastest time divided by its time; `None` (timeout or no
/// assignment) scores 0.
pub fn relative_score(times: &BTreeMap<String, Option<f64>>) -> BTreeMap<String, f64> {
    let fastest = times.values().flatten().copied().min_by(f64::total_cmp);
    times
        .iter()
        .map(|(c, t)| {
            let score = match (t, fastest) {
                (Some(t), Some(best)) if *t > 0.0 => best / t,
                (Some(_), Some(_)) => 1.0,
                _ => 0.0,
            };
            (c.clone(), score)
        })
        .collect()
}

/// Relative score averaged over every instance appearing in `records`.
pub fn mean_relative_scores(records: &[EvalRecord]) -> BTreeMap<String, f64> {
    let mut per_instance: BTreeMap<&str, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for rec in records {
        for r in &rec.results {
            let t = r.sat.as_ref().filter(|s| s.ok()).map(|s| s.sat_time);
            per_instance.entry(&r.instance).or_default().insert(rec.candidate.clone(), t);
        }
    }
    let mut sums: BTreeMap<String, f64> = records.iter().map(|r| (r.candidate.clone(), 0.0)).collect();
    for times in per_instance.values() {
        for (c, s) in relative_score(times) {
            *sums.get_mut(&c).expect("known candidate") += s;
        }
    }
    let n = per_instance.len().max(1) as f64;
    sums.into_iter().map(|(c, s)| (c, s / n)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Significance {
    Better,
    Worse,
    NoChange,
}

/// Seconds under which a change from a zero average is not significant.
pub const ZERO_BASE_FLOOR: f64 = 0.5;

/// Average runtime comparison: a change counts only beyond 10% (strict).
/// Two averages both at or below [`ZERO_BASE_FLOOR`] are timing noise.
pub fn significance(prev_avg: f64, new_avg: f64) -> Significance {
    if prev_avg.max(new_avg) <= ZERO_BASE_FLOOR {
        return Significance::NoChange;
    }
    if prev_avg <= 0.0 {
        return Significance::Worse;
    }
    let change = (new_avg - prev_avg) / prev_avg;
    if change < -0.10 {
        Significance::Better
    } else if change > 0.10 {
        Significance::Worse
    } else {
        Significance::NoChange
    }
}

/// Compares a new version with the last accepted one: runtime errors, then
/// LS timeouts, then SAT timeouts, then the 10% runtime rule.
pub fn compare_versions(prev: &EvalRecord, new: &EvalRecord) -> Significance {
    fn by_count(prev: usize, new: usize) -> Option<Significance> {
        match new.cmp(&prev) {
            Ordering::Less => Some(Significance::Better),
            Ordering::Greater => Some(Significance::Worse),
            Ordering::Equal => None,
        }
    }
    by_count(usize::from(prev.had_runtime_error), usize::from(new.had_runtime_error))
        .or_else(|| by_count(prev.ls_timeouts, new.ls_timeouts))
        .or_else(|| by_count(prev.sat_timeouts, new.sat_timeouts))
        .unwrap_or(match (prev.avg_ok_runtime, new.avg_ok_runtime) {
            (Some(p), Some(n)) => significance(p, n),
            (Some(_), None) => Significance::Worse,
            (None, Some(_)) => Significance::Better,
            (None, None) => Significance::NoChange,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitThresholds {
    /// Seconds; faster instances are discarded.
    pub train_min: f64,
    /// Seconds; slower or unsolved instances go to the test set.
    pub train_max: f64,
}

impl Default for SplitThresholds {
    fn default() -> Self {
        SplitThresholds {
            train_min: 10.0,
            train_max: 60.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub discarded: Vec<String>,
}

/// Train: solved within `[train_min, train_max]`; test: not solved within
/// `train_max`; faster instances and backend failures are discarded.
pub fn split_train_test(reference: &BTreeMap<String, SatSummary>, th: SplitThresholds) -> Split {
    let mut split = Split::default();
    for (inst, s) in reference {
        let bucket = match s.status {
            SatStatus::Sat | SatStatus::Unsat if s.sat_time < th.train_min => &mut split.discarded,
            SatStatus::Sat | SatStatus::Unsat if s.sat_time <= th.train_max => &mut split.train,
            SatStatus::Sat | SatStatus::Unsat | SatStatus::Timeout => &mut split.test,
            SatStatus::Error => &mut split.discarded,
        };
        bucket.push(inst.clone());
    }
    split
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvedNew {
    pub candidate: String,
    pub solved: usize,
    pub new: usize,
}

/// Solved = instances with status SAT; New = those the baseline did not
/// solve with status SAT.
pub fn solved_new_report(records: &[EvalRecord], baseline: &EvalRecord) -> Vec<SolvedNew> {
    let base = baseline.solved();
    records
        .iter()
        .map(|r| {
            let solved = r.solved();
            SolvedNew {
                candidate: r.candidate.clone(),
                solved: solved.len(),
                new: solved.difference(&base).count(),
            }
        })
        .collect()
}
