//! Learning curves over weeks of data, cross-user fine-tuning and daily
//! prediction timelines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;

use crate::dataset::{
    biweekly_partitions, ActivityLabelSet, Dataset, ImageRecord, Partition, SplitAssignment,
    TIMESTAMP_FORMAT,
};
use crate::error::{Error, Result};
use crate::fusion::{align_labels, union_label_set, LabelAlignment};
use crate::io::write_atomic;
use crate::metrics::{evaluate, MetricsReport};
use crate::pipeline::{fit_pipeline, Pipeline, PipelineSpec, RecordInputs};
use crate::pixel::SgdConfig;
use crate::scalar::Scalar;
use crate::tabular::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub weeks: u32,
    pub train_size: usize,
    /// Classes without training records in this prefix; their recall is N/A.
    pub absent_classes: Vec<String>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// `weeks,train_size,total,avg_class` followed by one recall column per class.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.points.first() else {
            return String::new();
        };
        let mut out = format!(
            "weeks,train_size,total_accuracy,avg_class_accuracy,{}\n",
            first.report.label_set.names().join(",")
        );
        for p in &self.points {
            let _ = write!(
                out,
                "{},{},{:.2},{:.2}",
                p.weeks, p.train_size, p.report.total_accuracy, p.report.avg_class_accuracy
            );
            for r in &p.report.per_class_recall {
                match r {
                    Some(r) => {
                        let _ = write!(out, ",{r:.2}");
                    }
                    None => out.push_str(",N/A"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Week counts at the end of each fortnight of the dataset: `2, 4, …`.
pub fn fortnight_prefixes(dataset: &Dataset) -> Vec<u32> {
    (1..=biweekly_partitions(dataset).len() as u32)
        .map(|i| 2 * i)
        .collect()
}

/// Retrains `spec` on the training records of each cumulative week prefix
/// and evaluates every model on the same test records.
///
/// `inputs` must hold one entry per usable record of `dataset`, keyed by id
/// through [`RecordInputs::id`]. Weeks count from the earliest usable date.
pub fn learning_curve<T: Scalar>(
    dataset: &Dataset,
    inputs: &[RecordInputs<T>],
    split: &SplitAssignment,
    spec: &PipelineSpec,
    weeks: &[u32],
) -> Result<LearningCurve> {
    if weeks.is_empty() || weeks[0] == 0 || weeks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "week prefixes must be positive and strictly increasing".into(),
        ));
    }
    let by_id: std::collections::HashMap<&str, &RecordInputs<T>> =
        inputs.iter().map(|i| (i.id.as_str(), i)).collect();
    let labeled = dataset.labeled();
    let first: NaiveDate = labeled
        .first()
        .map(|(r, _)| r.timestamp.date())
        .ok_or_else(|| Error::EmptyInput("dataset has no labeled records".into()))?;
    let lookup = |r: &ImageRecord| {
        by_id
            .get(r.id.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownId(r.id.clone()))
    };
    let test: Vec<(&ImageRecord, usize)> = labeled
        .iter()
        .copied()
        .filter(|(r, _)| split.get(&r.id) == Some(Partition::Test))
        .collect();
    if test.is_empty() {
        return Err(Error::EmptyInput("the split has no test records".into()));
    }
    let test_ids: HashSet<&str> = test.iter().map(|(r, _)| r.id.as_str()).collect();
    let test_inputs: Vec<&RecordInputs<T>> =
        test.iter().map(|(r, _)| lookup(r)).collect::<Result<_>>()?;
    let truth: Vec<usize> = test.iter().map(|t| t.1).collect();
    let label_set = dataset.label_set();

    let points: Vec<Result<CurvePoint>> = weeks
        .par_iter()
        .map(|&w| {
            let cutoff = first + chrono::Duration::days(7 * w as i64);
            let train: Vec<(&ImageRecord, usize)> = labeled
                .iter()
                .copied()
                .filter(|(r, _)| {
                    split.get(&r.id) == Some(Partition::Train) && r.timestamp.date() < cutoff
                })
                .collect();
            if train.iter().any(|(r, _)| test_ids.contains(r.id.as_str())) {
                return Err(Error::Config(format!(
                    "{w}-week prefix shares records with the test set"
                )));
            }
            if train.is_empty() {
                return Err(Error::EmptyInput(format!(
                    "{w}-week prefix has no training records"
                )));
            }
            let train_inputs: Vec<&RecordInputs<T>> = train
                .iter()
                .map(|(r, _)| lookup(r))
                .collect::<Result<_>>()?;
            let labels: Vec<usize> = train.iter().map(|t| t.1).collect();
            let pipeline = fit_pipeline(spec, label_set, &train_inputs, &labels)?;
            let predicted = pipeline.predict_classes(&test_inputs)?;
            let mut report = evaluate(&predicted, &truth, label_set)?;
            let mut seen = vec![false; label_set.len()];
            labels.iter().for_each(|&l| seen[l] = true);
            let absent: Vec<usize> = (0..label_set.len()).filter(|&c| !seen[c]).collect();
            report.mask_classes(&absent);
            Ok(CurvePoint {
                weeks: w,
                train_size: train.len(),
                absent_classes: absent
                    .iter()
                    .map(|&c| label_set.name(c).to_string())
                    .collect(),
                report,
            })
        })
        .collect();
    Ok(LearningCurve {
        points: points.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    /// Base labels followed by the new user's novel labels.
    pub label_set: ActivityLabelSet,
    pub alignment: LabelAlignment,
    /// Base model on day 2; novel classes are N/A and their records errors.
    pub before: MetricsReport,
    /// Fine-tuned model on day 2.
    pub after: MetricsReport,
}

/// Usable records of `day` with class indices into `union`, plus their inputs.
fn day_data<'a, T>(
    day: &'a Dataset,
    inputs: &'a [RecordInputs<T>],
    union: &ActivityLabelSet,
    name: &str,
) -> Result<(Vec<&'a RecordInputs<T>>, Vec<usize>)> {
    let by_id: std::collections::HashMap<&str, &RecordInputs<T>> =
        inputs.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, c) in day.labeled() {
        xs.push(
            *by_id
                .get(r.id.as_str())
                .ok_or_else(|| Error::UnknownId(r.id.clone()))?,
        );
        ys.push(
            union
                .index_of(day.label_set().name(c))
                .expect("union covers the day's labels"),
        );
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput(format!("{name} has no labeled records")));
    }
    Ok((xs, ys))
}

/// Evaluates `base` on a new user's day 2, fine-tunes it on day 1 and
/// evaluates again.
pub fn finetune_experiment<T: Scalar>(
    base: &Pipeline<T>,
    day1: &Dataset,
    day1_inputs: &[RecordInputs<T>],
    day2: &Dataset,
    day2_inputs: &[RecordInputs<T>],
    sgd: &SgdConfig,
) -> Result<FinetuneOutcome> {
    if day1.label_set() != day2.label_set() {
        return Err(Error::LabelSet(
            "day 1 and day 2 must share a label set".into(),
        ));
    }
    let alignment = align_labels(base.label_set(), day1.label_set());
    let union = union_label_set(base.label_set(), day1.label_set());
    let (x1, y1) = day_data(day1, day1_inputs, &union, "day 1")?;
    let (x2, y2) = day_data(day2, day2_inputs, &union, "day 2")?;

    // Base class indices are unchanged in the union set.
    let predicted = base.predict_classes(&x2)?;
    let mut before = evaluate(&predicted, &y2, &union)?;
    let novel: Vec<usize> = (base.label_set().len()..union.len()).collect();
    before.mask_classes(&novel);

    let tuned = base.finetune(&union, &x1, &y1, sgd)?;
    let after = evaluate(&tuned.predict_classes(&x2)?, &y2, &union)?;
    Ok(FinetuneOutcome {
        label_set: union,
        alignment,
        before,
        after,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub id: String,
    pub timestamp: NaiveDateTime,
    pub label: String,
    pub probabilities: Vec<f64>,
}

/// Maximal run of consecutive records sharing a predicted label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub entries: Vec<TimelineEntry>,
    pub segments: Vec<Segment>,
}

/// Builds the timeline of one day from records in chronological order and
/// their probability vectors over `label_set`.
pub fn build_timeline(
    records: &[&ImageRecord],
    probabilities: &[Vec<f64>],
    label_set: &ActivityLabelSet,
) -> Result<Timeline> {
    if records.len() != probabilities.len() {
        return Err(Error::Dimension {
            expected: records.len(),
            found: probabilities.len(),
        });
    }
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        if first.timestamp.date() != last.timestamp.date() {
            return Err(Error::Range(format!(
                "records span {} to {}; a timeline covers one day",
                first.timestamp.date(),
                last.timestamp.date()
            )));
        }
    }
    if records.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::Range(
            "timeline records must be in chronological order".into(),
        ));
    }
    let mut entries = Vec::with_capacity(records.len());
    let mut segments: Vec<Segment> = Vec::new();
    for (r, p) in records.iter().zip(probabilities) {
        if p.len() != label_set.len() {
            return Err(Error::Dimension {
                expected: label_set.len(),
                found: p.len(),
            });
        }
        let label = label_set.name(argmax(p)).to_string();
        match segments.last_mut() {
            Some(s) if s.label == label => {
                s.end = r.timestamp;
                s.count += 1;
            }
            _ => segments.push(Segment {
                start: r.timestamp,
                end: r.timestamp,
                label: label.clone(),
                count: 1,
            }),
        }
        entries.push(TimelineEntry {
            id: r.id.clone(),
            timestamp: r.timestamp,
            label,
            probabilities: p.clone(),
        });
    }
    Ok(Timeline { entries, segments })
}

impl Timeline {
    /// `#segments` block of `start<TAB>end<TAB>label` lines, then a
    /// `#records` block of `id<TAB>timestamp<TAB>label<TAB>probabilities…`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#segments\n");
        for s in &self.segments {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                s.start.format(TIMESTAMP_FORMAT),
                s.end.format(TIMESTAMP_FORMAT),
                s.label
            );
        }
        out.push_str("#records\n");
        for e in &self.entries {
            let _ = write!(
                out,
                "{}\t{}\t{}",
                e.id,
                e.timestamp.format(TIMESTAMP_FORMAT),
                e.label
            );
            for v in &e.probabilities {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}
