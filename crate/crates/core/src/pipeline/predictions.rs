//! Prediction files.
//!
//! ```text
//! #labels:A,B,C
//! id<TAB>truth<TAB>predicted<TAB>p_0<TAB>...<TAB>p_{K-1}
//! ```
//!
//! `truth` is empty for unlabeled records.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::ActivityLabelSet;
use crate::error::{Error, LineIssue, Result};
use crate::io::{numbered_lines, read_text, write_atomic};
use crate::metrics::{confusion, ConfusionMatrix, MetricsReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub truth: Option<usize>,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub label_set: ActivityLabelSet,
    pub rows: Vec<Prediction>,
}

impl PredictionSet {
    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.rows.iter().find(|p| p.id == id)
    }

    /// Metrics over the rows that carry a true label.
    pub fn evaluate(&self) -> Result<(MetricsReport, ConfusionMatrix)> {
        let (truth, predicted): (Vec<usize>, Vec<usize>) = self
            .rows
            .iter()
            .filter_map(|p| p.truth.map(|t| (t, p.predicted)))
            .unzip();
        let cm = confusion(&predicted, &truth, &self.label_set)?;
        Ok((cm.report(), cm))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#labels:{}\n", self.label_set.names().join(","));
        for p in &self.rows {
            let truth = p.truth.map_or("", |t| self.label_set.name(t));
            let _ = write!(
                out,
                "{}\t{truth}\t{}",
                p.id,
                self.label_set.name(p.predicted)
            );
            for v in &p.probabilities {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut label_set: Option<ActivityLabelSet> = None;
        let mut rows = Vec::new();
        let mut issues = Vec::new();
        for (n, line) in numbered_lines(text) {
            if let Some(rest) = line.strip_prefix("#labels:") {
                label_set = Some(ActivityLabelSet::new(rest.split(',').map(str::trim))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let Some(set) = &label_set else {
                return Err(Error::parse_line(
                    "predictions",
                    n,
                    "row before `#labels:` header",
                ));
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 + set.len() {
                issues.push(LineIssue {
                    line: n,
                    message: format!("expected {} fields, found {}", 3 + set.len(), fields.len()),
                });
                continue;
            }
            let truth = match fields[1] {
                "" => Some(None),
                l => set.index_of(l).map(Some),
            };
            let predicted = set.index_of(fields[2]);
            let probabilities: Option<Vec<f64>> =
                fields[3..].iter().map(|v| v.parse().ok()).collect();
            match (truth, predicted, probabilities) {
                (Some(truth), Some(predicted), Some(probabilities)) => rows.push(Prediction {
                    id: fields[0].to_string(),
                    truth,
                    predicted,
                    probabilities,
                }),
                _ => issues.push(LineIssue {
                    line: n,
                    message: "unknown label or unparsable probability".into(),
                }),
            }
        }
        if !issues.is_empty() {
            return Err(Error::parse("predictions", issues));
        }
        let label_set = label_set
            .ok_or_else(|| Error::parse_line("predictions", 1, "missing `#labels:` header"))?;
        Ok(Self { label_set, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }
}
