//! In-memory annotation state over a working copy of a manifest.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, Utc};
use egoact::dataset::{
    load_manifest, save_manifest, ActivityLabelSet, Dataset, ImageRecord, TIMESTAMP_FORMAT,
};
use serde::{Deserialize, Serialize};

use crate::error::{AnnotateError, Result};

/// One entry of a day listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDescriptor {
    pub id: String,
    pub timestamp: String,
    pub label: Option<String>,
    pub thumbnail: String,
    pub image: String,
}

/// A chronological run of live records. `Span` and `Time` accept their
/// endpoints in either order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChunkRange {
    Ids { ids: Vec<String> },
    Span { from: String, to: String },
    Time { start: String, end: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeleteStatus {
    Deleted,
    AlreadyDeleted,
    UnknownId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeleteOutcome {
    pub id: String,
    pub status: DeleteStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AuditAction {
    Label { label: String, ids: Vec<String> },
    Delete { ids: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub at: String,
    #[serde(flatten)]
    pub action: AuditAction,
}

#[derive(Debug, Clone)]
pub struct AnnotationSession {
    root: PathBuf,
    label_set: ActivityLabelSet,
    /// Chronological.
    records: Vec<ImageRecord>,
    index: HashMap<String, usize>,
    audit: Vec<AuditEntry>,
}

fn parse_time(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).map_err(|_| {
        AnnotateError::BadRequest(format!(
            "timestamp `{s}` is not of the form {TIMESTAMP_FORMAT}"
        ))
    })
}

impl AnnotationSession {
    /// Image paths resolve against `root`.
    pub fn new(dataset: Dataset, root: impl Into<PathBuf>) -> Self {
        let label_set = dataset.label_set().clone();
        let records = dataset.into_records();
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Self {
            root: root.into(),
            label_set,
            records,
            index,
            audit: Vec::new(),
        }
    }

    /// Loads a manifest; images resolve against its directory.
    pub fn open(manifest: &Path) -> Result<Self> {
        let dataset = load_manifest(manifest)?;
        let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::new(dataset, root))
    }

    pub fn label_set(&self) -> &ActivityLabelSet {
        &self.label_set
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// Dates with at least one live record, ascending.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = self.live().map(|r| r.timestamp.date()).collect();
        days.dedup();
        days
    }

    fn live(&self) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(|r| !r.deleted)
    }

    /// Live records of `date` in chronological order; empty for dates
    /// without records.
    pub fn list_day(&self, date: NaiveDate) -> Vec<ImageDescriptor> {
        self.live()
            .filter(|r| r.timestamp.date() == date)
            .map(|r| ImageDescriptor {
                id: r.id.clone(),
                timestamp: r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
                label: r.label.clone(),
                thumbnail: format!("/thumbs/{}", r.id),
                image: format!("/images/{}", r.id),
            })
            .collect()
    }

    fn live_position(&self, id: &str) -> Result<usize> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| AnnotateError::UnknownId(id.to_string()))?;
        if self.records[i].deleted {
            return Err(AnnotateError::Deleted(id.to_string()));
        }
        Ok(i)
    }

    /// Record indices of a chunk, validated against the live order.
    fn resolve(&self, range: &ChunkRange) -> Result<Vec<usize>> {
        let live: Vec<usize> = (0..self.records.len())
            .filter(|&i| !self.records[i].deleted)
            .collect();
        let rank = |i: usize| live.binary_search(&i).expect("live record");
        let chunk = match range {
            ChunkRange::Ids { ids } => {
                if ids.is_empty() {
                    return Err(AnnotateError::EmptyRange);
                }
                let mut ranks: Vec<usize> = ids
                    .iter()
                    .map(|id| self.live_position(id).map(rank))
                    .collect::<Result<_>>()?;
                ranks.sort_unstable();
                if ranks.windows(2).any(|w| w[1] != w[0] + 1) {
                    return Err(AnnotateError::NotContiguous(
                        "ids must be distinct and adjacent among live images".into(),
                    ));
                }
                ranks.iter().map(|&r| live[r]).collect()
            }
            ChunkRange::Span { from, to } => {
                let (a, b) = (
                    rank(self.live_position(from)?),
                    rank(self.live_position(to)?),
                );
                live[a.min(b)..=a.max(b)].to_vec()
            }
            ChunkRange::Time { start, end } => {
                let (a, b) = (parse_time(start)?, parse_time(end)?);
                let (a, b) = (a.min(b), a.max(b));
                live.into_iter()
                    .filter(|&i| (a..=b).contains(&self.records[i].timestamp))
                    .collect()
            }
        };
        if chunk.is_empty() {
            return Err(AnnotateError::EmptyRange);
        }
        Ok(chunk)
    }

    /// Labels every record of `range`, overwriting earlier labels. Nothing
    /// changes when the call fails.
    pub fn label_chunk(&mut self, range: &ChunkRange, label: &str) -> Result<usize> {
        if !self.label_set.contains(label) {
            return Err(AnnotateError::UnknownLabel(label.to_string()));
        }
        let chunk = self.resolve(range)?;
        for &i in &chunk {
            self.records[i].label = Some(label.to_string());
        }
        self.log(AuditAction::Label {
            label: label.to_string(),
            ids: chunk.iter().map(|&i| self.records[i].id.clone()).collect(),
        });
        Ok(chunk.len())
    }

    /// Marks records deleted, reporting a status per requested id. Unknown
    /// ids do not prevent the others from being applied.
    pub fn delete_images(&mut self, ids: &[String]) -> Result<Vec<DeleteOutcome>> {
        if ids.is_empty() {
            return Err(AnnotateError::EmptyRange);
        }
        let mut changed = Vec::new();
        let outcomes = ids
            .iter()
            .map(|id| {
                let status = match self.index.get(id) {
                    None => DeleteStatus::UnknownId,
                    Some(&i) if self.records[i].deleted => DeleteStatus::AlreadyDeleted,
                    Some(&i) => {
                        self.records[i].deleted = true;
                        changed.push(id.clone());
                        DeleteStatus::Deleted
                    }
                };
                DeleteOutcome {
                    id: id.clone(),
                    status,
                }
            })
            .collect();
        self.log(AuditAction::Delete { ids: changed });
        Ok(outcomes)
    }

    fn log(&mut self, action: AuditAction) {
        self.audit.push(AuditEntry {
            at: Utc::now().naive_utc().format(TIMESTAMP_FORMAT).to_string(),
            action,
        });
    }

    /// Current state as a dataset; deleted records are left out.
    pub fn snapshot(&self) -> Dataset {
        Dataset::new(self.label_set.clone(), self.live().cloned().collect())
            .expect("session records stay valid")
    }

    /// Writes the snapshot atomically in manifest format and returns its
    /// record count.
    pub fn export_manifest(&self, path: &Path) -> Result<usize> {
        let snapshot = self.snapshot();
        save_manifest(&snapshot, path)?;
        Ok(snapshot.len())
    }

    /// File of a live record.
    pub fn image_path(&self, id: &str) -> Result<PathBuf> {
        let i = self.live_position(id)?;
        Ok(self.root.join(&self.records[i].path))
    }
}
