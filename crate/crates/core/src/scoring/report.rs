//! Solved/New tables per candidate class and train-vs-test relative scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_relative_scores, rank, EvalRecord, ScoringError};

/// Where a candidate sits in its refinement lineage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub id: String,
    /// Id of the version-1 candidate the lineage starts from.
    pub root: String,
    pub version: u32,
}

pub const TABLE1_HEADER: [&str; 7] = [
    "Method",
    "Base Solved",
    "Base New",
    "Refined Solved",
    "Refined New",
    "Structure Solved",
    "Structure New",
];

pub const RELATIVE_HEADER: [&str; 3] = ["Candidate", "Train score", "Test score"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub method: String,
    /// `(candidate, solved, new)` per class; `None` renders as `-`.
    pub base: Option<(String, usize, usize)>,
    pub refined: Option<(String, usize, usize)>,
    pub structure: Option<(String, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn new(header: &[&str]) -> Self {
        ReportTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Left-aligned first column, right-aligned others.
    pub fn to_text(&self) -> String {
        let cols = self.header.len();
        let mut width = vec![0; cols];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = width[i])
                    } else {
                        format!("{c:>w$}", w = width[i])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

fn best_in<'a>(
    train: &'a BTreeMap<&str, &EvalRecord>,
    members: &[&'a CandidateInfo],
    versions: std::ops::RangeInclusive<u32>,
) -> Result<Option<&'a str>, ScoringError> {
    let records: Vec<EvalRecord> = members
        .iter()
        .filter(|c| versions.contains(&c.version))
        .filter_map(|c| train.get(c.id.as_str()).map(|r| (*r).clone()))
        .collect();
    let ranked = rank(&records)?;
    Ok(ranked.first().and_then(|best| {
        members
            .iter()
            .find(|c| c.id == best.candidate)
            .map(|c| c.id.as_str())
    }))
}

/// Per lineage root: the base (version 1), the best-ranked of versions
/// 2..=11 and the best of 12..=20 on `train`.
pub fn class_representatives(
    infos: &[CandidateInfo],
    train: &[EvalRecord],
) -> Result<BTreeMap<String, [Option<String>; 3]>, ScoringError> {
    let train_by: BTreeMap<&str, &EvalRecord> = train.iter().map(|r| (r.candidate.as_str(), r)).collect();
    let mut lineages: BTreeMap<&str, Vec<&CandidateInfo>> = BTreeMap::new();
    for c in infos {
        lineages.entry(c.root.as_str()).or_default().push(c);
    }
    let mut out = BTreeMap::new();
    for (root, members) in &lineages {
        let base = members.iter().find(|c| c.version == 1).map(|c| c.id.clone());
        let refined = best_in(&train_by, members, 2..=11)?.map(str::to_string);
        let structure = best_in(&train_by, members, 12..=20)?.map(str::to_string);
        out.insert(root.to_string(), [base, refined, structure]);
    }
    Ok(out)
}

/// One row for the solver alone (`SAT`), then one per lineage root with
/// the cells of [`class_representatives`]. Solved/New come from `test`.
pub fn table1(
    infos: &[CandidateInfo],
    train: &[EvalRecord],
    test: &[EvalRecord],
    baseline: &EvalRecord,
) -> Result<(Vec<Table1Row>, ReportTable), ScoringError> {
    let test_by: BTreeMap<&str, &EvalRecord> = test.iter().map(|r| (r.candidate.as_str(), r)).collect();
    let base_solved = baseline.solved();

    let cell = |id: &Option<String>| -> Option<(String, usize, usize)> {
        let id = id.as_deref()?;
        let rec = test_by.get(id)?;
        let solved = rec.solved();
        let new = solved.difference(&base_solved).count();
        Some((id.to_string(), solved.len(), new))
    };

    let mut rows = Vec::new();
    for (root, [base, refined, structure]) in class_representatives(infos, train)? {
        rows.push(Table1Row {
            method: root,
            base: cell(&base),
            refined: cell(&refined),
            structure: cell(&structure),
        });
    }

    let mut table = ReportTable::new(&TABLE1_HEADER);
    let dash = || "-".to_string();
    table.rows.push(vec!["SAT".into(), base_solved.len().to_string(), dash(), dash(), dash(), dash(), dash()]);
    for row in &rows {
        let mut cells = vec![row.method.clone()];
        for c in [&row.base, &row.refined, &row.structure] {
            match c {
                Some((_, s, n)) => cells.extend([s.to_string(), n.to_string()]),
                None => cells.extend([dash(), dash()]),
            }
        }
        table.rows.push(cells);
    }
    Ok((rows, table))
}

/// Average relative score on training and test records for every candidate
/// evaluated on the test set.
pub fn relative_score_table(train: &[EvalRecord], test: &[EvalRecord]) -> ReportTable {
    let tr = mean_relative_scores(train);
    let te = mean_relative_scores(test);
    let mut table = ReportTable::new(&RELATIVE_HEADER);
    for (c, s) in &te {
        let t = tr.get(c).map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        table.rows.push(vec![c.clone(), t, format!("{s:.4}")]);
    }
    table
}
