//! Total accuracy, average class accuracy and confusion matrices.

use std::fmt::Write as _;

use crate::dataset::ActivityLabelSet;
use crate::error::{Error, Result};

/// Percentages are in `[0, 100]`. Recall is `None` for classes without test
/// support (or masked out, see [`MetricsReport::mask_classes`]).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label_set: ActivityLabelSet,
    pub total_accuracy: f64,
    pub avg_class_accuracy: f64,
    pub per_class_recall: Vec<Option<f64>>,
    pub supports: Vec<usize>,
}

fn check_inputs(predicted: &[usize], truth: &[usize], k: usize) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("nothing to evaluate".into()));
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&c| c >= k) {
        return Err(Error::Config(format!(
            "class index {bad} outside {k} classes"
        )));
    }
    Ok(())
}

/// Support-weighted and unweighted means of per-class recalls (percent).
/// Classes with `None` recall or zero weight are left out of both.
pub fn aggregate(recalls: &[Option<f64>], weights: &[f64]) -> (f64, f64) {
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    let mut sum = 0.0;
    let mut present = 0usize;
    for (r, &w) in recalls.iter().zip(weights) {
        if let Some(r) = r {
            if w > 0.0 {
                weighted += w * r;
                total_weight += w;
                sum += r;
                present += 1;
            }
        }
    }
    let total = if total_weight > 0.0 {
        weighted / total_weight
    } else {
        0.0
    };
    let avg = if present > 0 {
        sum / present as f64
    } else {
        0.0
    };
    (total, avg)
}

pub fn evaluate(
    predicted: &[usize],
    truth: &[usize],
    label_set: &ActivityLabelSet,
) -> Result<MetricsReport> {
    let cm = confusion(predicted, truth, label_set)?;
    Ok(cm.report())
}

impl MetricsReport {
    /// Forces the recall of `classes` to N/A and recomputes the class
    /// average. Total accuracy is unchanged: those records still count.
    pub fn mask_classes(&mut self, classes: &[usize]) {
        for &c in classes {
            self.per_class_recall[c] = None;
        }
        let present: Vec<f64> = self.per_class_recall.iter().flatten().copied().collect();
        self.avg_class_accuracy = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
    }

    pub fn recall_of(&self, label: &str) -> Option<f64> {
        self.label_set
            .index_of(label)
            .and_then(|i| self.per_class_recall[i])
    }

    /// `class,support,recall` rows followed by the two summary rows, all
    /// percentages to two decimals; N/A for classes without recall.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,support,recall\n");
        for ((name, support), recall) in self
            .label_set
            .names()
            .iter()
            .zip(&self.supports)
            .zip(&self.per_class_recall)
        {
            let recall = recall.map_or("N/A".to_string(), |r| format!("{r:.2}"));
            let _ = writeln!(out, "{name},{support},{recall}");
        }
        let _ = writeln!(out, "avg class accuracy,,{:.2}", self.avg_class_accuracy);
        let _ = writeln!(
            out,
            "total accuracy,{},{:.2}",
            self.supports.iter().sum::<usize>(),
            self.total_accuracy
        );
        out
    }
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub label_set: ActivityLabelSet,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion(
    predicted: &[usize],
    truth: &[usize],
    label_set: &ActivityLabelSet,
) -> Result<ConfusionMatrix> {
    let k = label_set.len();
    check_inputs(predicted, truth, k)?;
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        label_set: label_set.clone(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn supports(&self) -> Vec<usize> {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<u64>() as usize)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn recalls(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64 * 100.0)
            })
            .collect()
    }

    pub fn report(&self) -> MetricsReport {
        let recalls = self.recalls();
        let supports = self.supports();
        let (_, avg) = aggregate(
            &recalls,
            &supports.iter().map(|&s| s as f64).collect::<Vec<_>>(),
        );
        MetricsReport {
            label_set: self.label_set.clone(),
            total_accuracy: self.trace() as f64 / self.total() as f64 * 100.0,
            avg_class_accuracy: avg,
            per_class_recall: recalls,
            supports,
        }
    }

    /// Row-normalized percentages to two decimals, with a header row of
    /// predicted labels and the actual label leading each row.
    pub fn to_csv(&self) -> String {
        let names = self.label_set.names();
        let mut out = format!("actual\\predicted,{}\n", names.join(","));
        for (name, row) in names.iter().zip(&self.counts) {
            let n: u64 = row.iter().sum();
            out.push_str(name);
            for &c in row {
                let pct = if n == 0 {
                    0.0
                } else {
                    c as f64 / n as f64 * 100.0
                };
                let _ = write!(out, ",{pct:.2}");
            }
            out.push('\n');
        }
        out
    }

    pub fn counts_csv(&self) -> String {
        let names = self.label_set.names();
        let mut out = format!("actual\\predicted,{}\n", names.join(","));
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}
