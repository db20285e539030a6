//! Probability tables: per-image class distributions from any external model.
//!
//! ```text
//! #labels:Chores,Driving,...
//! <id><TAB>p_0<TAB>...<TAB>p_{K-1}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{ActivityLabelSet, Dataset};
use crate::error::{Error, LineIssue, Result};
use crate::io::{numbered_lines, read_text, write_atomic};
use crate::scalar::{parse_scalar, Scalar};

pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable<T> {
    label_set: ActivityLabelSet,
    rows: BTreeMap<String, Vec<T>>,
}

/// Why a vector is not a probability distribution, if it is not.
pub fn simplex_violation<T: Scalar>(p: &[T], k: usize, tolerance: f64) -> Option<String> {
    if p.len() != k {
        return Some(format!("expected {k} entries, found {}", p.len()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Some(format!("entry {v} is negative or not finite"));
    }
    let sum: f64 = p.iter().map(|v| v.as_f64()).sum();
    if (sum - 1.0).abs() > tolerance {
        return Some(format!("entries sum to {sum}, not 1"));
    }
    None
}

impl<T: Scalar> ProbabilityTable<T> {
    pub fn new(label_set: ActivityLabelSet) -> Self {
        Self {
            label_set,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, probabilities: Vec<T>) -> Result<()> {
        let id = id.into();
        if let Some(msg) =
            simplex_violation(&probabilities, self.label_set.len(), SIMPLEX_TOLERANCE)
        {
            return Err(Error::Config(format!("probabilities for `{id}`: {msg}")));
        }
        self.rows.insert(id, probabilities);
        Ok(())
    }

    pub fn label_set(&self) -> &ActivityLabelSet {
        &self.label_set
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &BTreeMap<String, Vec<T>> {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Table ids that are not records of `dataset`; allowed, but worth reporting.
    pub fn ids_not_in(&self, dataset: &Dataset) -> Vec<String> {
        let known: std::collections::HashSet<&str> =
            dataset.records().iter().map(|r| r.id.as_str()).collect();
        self.rows
            .keys()
            .filter(|id| !known.contains(id.as_str()))
            .cloned()
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#labels:{}\n", self.label_set.names().join(","));
        for (id, p) in &self.rows {
            out.push_str(id);
            for v in p {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses and validates a table whose header must match `label_set`
    /// exactly. All offending rows are reported together.
    pub fn from_text(text: &str, label_set: &ActivityLabelSet) -> Result<Self> {
        let mut table = Self::new(label_set.clone());
        let mut header = false;
        let mut issues = Vec::new();
        for (n, line) in numbered_lines(text) {
            if let Some(rest) = line.strip_prefix("#labels:") {
                let names: Vec<&str> = rest.split(',').map(str::trim).collect();
                if names
                    != label_set
                        .names()
                        .iter()
                        .map(String::as_str)
                        .collect::<Vec<_>>()
                {
                    return Err(Error::parse_line(
                        "probability table",
                        n,
                        "label header does not match the dataset's label set",
                    ));
                }
                header = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if !header {
                return Err(Error::parse_line(
                    "probability table",
                    n,
                    "row before `#labels:` header",
                ));
            }
            let mut parts = line.split('\t');
            let id = parts.next().unwrap_or_default();
            let values: Option<Vec<T>> = parts.map(parse_scalar).collect();
            let Some(values) = values else {
                issues.push(LineIssue {
                    line: n,
                    message: format!("row `{id}` has an unparsable value"),
                });
                continue;
            };
            if let Some(msg) = simplex_violation(&values, label_set.len(), SIMPLEX_TOLERANCE) {
                issues.push(LineIssue {
                    line: n,
                    message: format!("row `{id}`: {msg}"),
                });
                continue;
            }
            if table.rows.insert(id.to_string(), values).is_some() {
                issues.push(LineIssue {
                    line: n,
                    message: format!("duplicate id `{id}`"),
                });
            }
        }
        if !header {
            issues.insert(
                0,
                LineIssue {
                    line: 1,
                    message: "missing `#labels:` header".into(),
                },
            );
        }
        if !issues.is_empty() {
            return Err(Error::parse("probability table", issues));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

pub fn load_probability_table<T: Scalar>(
    path: &Path,
    label_set: &ActivityLabelSet,
) -> Result<ProbabilityTable<T>> {
    ProbabilityTable::from_text(&read_text(path)?, label_set)
}
