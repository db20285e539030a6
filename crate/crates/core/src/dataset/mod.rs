//! Manifest-backed dataset model: labeled, timestamped egocentric captures.

mod manifest;
mod split;

use std::collections::{HashMap, HashSet};

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

pub use manifest::{load_manifest, manifest_text, parse_manifest, save_manifest, TIMESTAMP_FORMAT};
pub use split::{
    apportion, stratified_split, stratified_split_with, Partition, SplitAssignment, SplitOptions,
    SplitRatios,
};

/// The 19 daily activities and their image counts in the reference lifelog.
pub const REFERENCE_CLASS_COUNTS: [(&str, usize); 19] = [
    ("Chores", 725),
    ("Driving", 1031),
    ("Cooking", 759),
    ("Exercising", 502),
    ("Reading", 1414),
    ("Presentation", 848),
    ("Dogs", 1149),
    ("Resting", 106),
    ("Eating", 4699),
    ("Working", 13895),
    ("Chatting", 113),
    ("TV", 1584),
    ("Meeting", 1312),
    ("Cleaning", 642),
    ("Socializing", 970),
    ("Shopping", 606),
    ("Biking", 696),
    ("Family", 8267),
    ("Hygiene", 1266),
];

/// Ordered set of activity names. The position of a name is its class index
/// in every probability vector and confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityLabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ActivityLabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.contains(['\t', ',', '\n']) {
                return Err(Error::LabelSet(format!(
                    "label `{l}` is empty or contains a separator"
                )));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::LabelSet(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels, index })
    }

    /// The 19-class set of the reference lifelog, in its canonical order.
    pub fn daily_activities() -> Self {
        Self::new(REFERENCE_CLASS_COUNTS.iter().map(|(l, _)| *l))
            .expect("reference labels are distinct")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    /// Image path relative to the dataset root.
    pub path: String,
    /// Local wall-clock capture time.
    pub timestamp: NaiveDateTime,
    pub label: Option<String>,
    pub user_id: String,
    pub deleted: bool,
}

impl ImageRecord {
    /// Labeled and not deleted: the only records used for training and evaluation.
    pub fn is_usable(&self) -> bool {
        !self.deleted && self.label.is_some()
    }
}

/// Records sorted chronologically, all labels drawn from `label_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    label_set: ActivityLabelSet,
    user_id: String,
}

impl Dataset {
    /// Validates ids and labels, then sorts by timestamp (stable, so records
    /// sharing a timestamp keep their input order).
    pub fn new(label_set: ActivityLabelSet, mut records: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if let Some(l) = &r.label {
                if !label_set.contains(l) {
                    return Err(Error::UnknownLabel(l.clone()));
                }
            }
        }
        records.sort_by_key(|r| r.timestamp);
        let user_id = records
            .first()
            .map(|r| r.user_id.clone())
            .unwrap_or_default();
        Ok(Self {
            records,
            label_set,
            user_id,
        })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ImageRecord> {
        self.records
    }

    pub fn label_set(&self) -> &ActivityLabelSet {
        &self.label_set
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Non-deleted labeled records in chronological order.
    pub fn usable(&self) -> impl Iterator<Item = &ImageRecord> + '_ {
        self.records.iter().filter(|r| r.is_usable())
    }

    /// Class index of a usable record.
    pub fn class_of(&self, record: &ImageRecord) -> Option<usize> {
        record
            .label
            .as_deref()
            .and_then(|l| self.label_set.index_of(l))
    }

    /// Usable records paired with their class indices.
    pub fn labeled(&self) -> Vec<(&ImageRecord, usize)> {
        self.usable()
            .map(|r| {
                (
                    r,
                    self.class_of(r).expect("labels validated on construction"),
                )
            })
            .collect()
    }

    /// A dataset over the records accepted by `keep`, sharing the label set.
    pub fn filtered(&self, mut keep: impl FnMut(&ImageRecord) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            label_set: self.label_set.clone(),
            user_id: self.user_id.clone(),
        }
    }

    /// Same records re-expressed against a superset label set.
    pub fn with_label_set(&self, label_set: ActivityLabelSet) -> Result<Dataset> {
        Dataset::new(label_set, self.records.clone())
    }

    /// Distinct calendar dates with at least one non-deleted record.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self
            .records
            .iter()
            .filter(|r| !r.deleted)
            .map(|r| r.timestamp.date())
            .collect();
        dates.dedup();
        dates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassShare {
    pub label: String,
    pub count: usize,
    pub percent: f64,
}

/// Shares of each class given per-class counts aligned with `label_set`.
pub fn distribution_from_counts(label_set: &ActivityLabelSet, counts: &[usize]) -> Vec<ClassShare> {
    let total: usize = counts.iter().sum();
    label_set
        .names()
        .iter()
        .zip(counts)
        .map(|(label, &count)| ClassShare {
            label: label.clone(),
            count,
            percent: if total == 0 {
                0.0
            } else {
                count as f64 / total as f64 * 100.0
            },
        })
        .collect()
}

/// Per-class counts over usable records, indexed by class.
pub fn class_counts(dataset: &Dataset) -> Vec<usize> {
    let mut counts = vec![0usize; dataset.label_set().len()];
    for (_, c) in dataset.labeled() {
        counts[c] += 1;
    }
    counts
}

/// Count and percentage of each class among non-deleted labeled records.
/// Classes without records appear with count 0.
pub fn class_distribution(dataset: &Dataset) -> Vec<ClassShare> {
    distribution_from_counts(dataset.label_set(), &class_counts(dataset))
}

/// Accuracy of always predicting the most frequent class.
pub fn majority_class_baseline(dataset: &Dataset) -> Result<f64> {
    let counts = class_counts(dataset);
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("dataset has no labeled records".into()));
    }
    Ok(*counts.iter().max().expect("non-empty") as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fortnight {
    /// 0-based bin number; bin `i` covers weeks `2i+1` and `2i+2`.
    pub index: usize,
    pub start: NaiveDate,
    pub count: usize,
}

impl Fortnight {
    pub fn end(&self) -> NaiveDate {
        self.start + chrono::Duration::days(13)
    }
}

/// Usable records binned into consecutive 14-day periods starting at the
/// earliest record's date. Empty periods in between are kept.
pub fn biweekly_partitions(dataset: &Dataset) -> Vec<Fortnight> {
    let dates: Vec<NaiveDate> = dataset.usable().map(|r| r.timestamp.date()).collect();
    let Some(&first) = dates.first() else {
        return Vec::new();
    };
    let last = *dates.last().expect("non-empty");
    let bins = ((last - first).num_days() / 14) as usize + 1;
    let mut out: Vec<Fortnight> = (0..bins)
        .map(|i| Fortnight {
            index: i,
            start: first + chrono::Duration::days(14 * i as i64),
            count: 0,
        })
        .collect();
    for d in dates {
        out[((d - first).num_days() / 14) as usize].count += 1;
    }
    out
}
