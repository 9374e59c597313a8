use std::collections::{BTreeSet, HashMap};

use super::EncodeError;

/// Labelled rows of numeric features. Class ids are dense from 0 and follow
/// the sorted order of the label names.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_count: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self, EncodeError> {
        if rows.len() != labels.len() {
            return Err(EncodeError::InvalidInstance(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let feature_count = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != feature_count) {
            return Err(EncodeError::InvalidInstance(format!(
                "row {} has {} features, expected {feature_count}",
                i + 1,
                rows[i].len()
            )));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(EncodeError::InvalidInstance("non-finite feature value".into()));
        }
        let class_names: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let ids: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let labels: Vec<usize> = labels.iter().map(|l| ids[l.as_str()]).collect();

        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, row) in rows.iter().enumerate() {
            let key: Vec<u64> = row.iter().map(|x| (x + 0.0).to_bits()).collect();
            match seen.get(&key) {
                Some(&j) if labels[j] != labels[i] => return Err(EncodeError::ContradictoryRows(j + 1, i + 1)),
                Some(_) => {}
                None => {
                    seen.insert(key, i);
                }
            }
        }
        Ok(Dataset {
            rows,
            labels,
            class_names,
            feature_count,
        })
    }

    /// Convenience constructor with numeric class ids already assigned.
    pub fn from_ids(rows: Vec<Vec<f64>>, labels: &[usize]) -> Result<Self, EncodeError> {
        let width = labels.iter().max().map_or(1, |m| m.to_string().len());
        Dataset::new(rows, labels.iter().map(|l| format!("{l:0width$}")).collect())
    }

    /// CSV with numeric feature columns and the label in the last column.
    /// A first record whose feature cells are not all numeric is a header.
    pub fn parse_csv(text: &str) -> Result<Self, EncodeError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 1;
            let record = record.map_err(|e| EncodeError::Parse {
                line: e.position().map_or(line, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            if record.len() < 2 {
                return Err(EncodeError::Parse {
                    line: record.position().map_or(line, |p| p.line() as usize),
                    msg: "expected at least one feature column and a label".into(),
                });
            }
            let cells: Vec<&str> = record.iter().collect();
            let (features, label) = cells.split_at(cells.len() - 1);
            let parsed: Result<Vec<f64>, _> = features.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(values) => {
                    rows.push(values);
                    labels.push(label[0].to_string());
                }
                Err(_) if idx == 0 => continue,
                Err(_) => {
                    return Err(EncodeError::Parse {
                        line: record.position().map_or(line, |p| p.line() as usize),
                        msg: "non-numeric feature value".into(),
                    })
                }
            }
        }
        Dataset::new(rows, labels)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            for x in row {
                out.push_str(&x.to_string());
                out.push(',');
            }
            out.push_str(&self.class_names[label]);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.rows[row][feature]
    }

    /// Distinct values of a feature in ascending order.
    pub fn distinct_values(&self, feature: usize) -> Vec<f64> {
        let mut vals: Vec<f64> = self.rows.iter().map(|r| r[feature]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    }

    /// Midpoints between consecutive distinct values of a feature.
    pub fn cuts(&self, feature: usize) -> Vec<f64> {
        self.distinct_values(feature)
            .windows(2)
            .map(|w| (w[0] + w[1]) / 2.0)
            .collect()
    }
}
