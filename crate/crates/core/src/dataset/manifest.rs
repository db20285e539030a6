//! Tab-separated manifest files.
//!
//! ```text
//! #labels:Chores,Driving,...
//! id<TAB>path<TAB>YYYY-MM-DDTHH:MM:SS<TAB>label<TAB>user_id<TAB>deleted
//! ```
//!
//! `label` is empty for unlabeled records and `deleted` is `0` or `1`.
//! Other lines starting with `#` are comments.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDateTime;

use super::{ActivityLabelSet, Dataset, ImageRecord};
use crate::error::{Error, LineIssue, Result};
use crate::io::{numbered_lines, read_text, write_atomic};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const LABELS_HEADER: &str = "#labels:";

pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_manifest(&text).map_err(|e| match e {
        Error::Parse { issues, .. } => Error::parse(path.display().to_string(), issues),
        other => other,
    })
}

/// Parses manifest text, collecting every bad line before failing.
pub fn parse_manifest(text: &str) -> Result<Dataset> {
    let mut label_set = None;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut ids = HashSet::new();
    let mut issue = |line, message: String| issues.push(LineIssue { line, message });

    for (line_no, line) in numbered_lines(text) {
        if let Some(rest) = line.strip_prefix(LABELS_HEADER) {
            let names: Vec<&str> = rest
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            match ActivityLabelSet::new(names) {
                Ok(set) => label_set = Some(set),
                Err(e) => issue(line_no, e.to_string()),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            issue(
                line_no,
                format!("expected 6 tab-separated fields, found {}", fields.len()),
            );
            continue;
        }
        let [id, path, stamp, label, user, deleted] = fields[..] else {
            unreachable!()
        };
        if id.is_empty() {
            issue(line_no, "empty id".into());
            continue;
        }
        let timestamp = match NaiveDateTime::parse_from_str(stamp, TIMESTAMP_FORMAT) {
            Ok(t) => t,
            Err(_) => {
                issue(line_no, format!("unparsable timestamp `{stamp}`"));
                continue;
            }
        };
        let deleted = match deleted {
            "0" => false,
            "1" => true,
            other => {
                issue(
                    line_no,
                    format!("deleted flag must be 0 or 1, found `{other}`"),
                );
                continue;
            }
        };
        if !label.is_empty() {
            match &label_set {
                Some(set) if set.contains(label) => {}
                Some(_) => {
                    issue(line_no, format!("unknown label `{label}`"));
                    continue;
                }
                None => {
                    issue(line_no, "record before `#labels:` header".into());
                    continue;
                }
            }
        }
        if !ids.insert(id.to_string()) {
            issue(line_no, format!("duplicate id `{id}`"));
            continue;
        }
        records.push(ImageRecord {
            id: id.into(),
            path: path.into(),
            timestamp,
            label: (!label.is_empty()).then(|| label.to_string()),
            user_id: user.into(),
            deleted,
        });
    }
    let Some(label_set) = label_set else {
        issues.push(LineIssue {
            line: 1,
            message: "missing `#labels:` header".into(),
        });
        return Err(Error::parse("manifest", issues));
    };
    if !issues.is_empty() {
        return Err(Error::parse("manifest", issues));
    }
    Dataset::new(label_set, records)
}

/// Serialized manifest in chronological order.
pub fn manifest_text(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(64 * (dataset.len() + 1));
    out.push_str(LABELS_HEADER);
    out.push_str(&dataset.label_set().names().join(","));
    out.push('\n');
    for r in dataset.records() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.path,
            r.timestamp.format(TIMESTAMP_FORMAT),
            r.label.as_deref().unwrap_or(""),
            r.user_id,
            u8::from(r.deleted)
        );
    }
    out
}

/// Writes the manifest atomically.
pub fn save_manifest(dataset: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, manifest_text(dataset).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "#labels:Chores,Driving,Cooking,Exercising,Reading,Presentation,Dogs,Resting,Eating,Working,Chatting,TV,Meeting,Cleaning,Socializing,Shopping,Biking,Family,Hygiene\n";

    #[test]
    fn loads_and_sorts() {
        let text = format!(
            "{HEADER}c\timg/c.jpg\t2024-03-01T09:00:00\tWorking\tu1\t0\n\
             a\timg/a.jpg\t2024-03-01T07:30:00\t\tu1\t0\n\
             # comment\n\
             b\timg/b.jpg\t2024-03-01T08:15:00\tEating\tu1\t1\n"
        );
        let ds = parse_manifest(&text).unwrap();
        let ids: Vec<&str> = ds.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ds.records()[2].label.as_deref(), Some("Working"));
        assert!(ds.records()[1].deleted);
        assert_eq!(ds.user_id(), "u1");
    }

    #[test]
    fn unknown_label_names_line() {
        let text = format!(
            "{HEADER}a\ta.jpg\t2024-03-01T07:30:00\tWorking\tu\t0\nb\tb.jpg\t2024-03-01T07:31:00\tSleeping\tu\t0\n"
        );
        let err = parse_manifest(&text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("Sleeping"), "{err}");
    }

    #[test]
    fn reports_every_malformed_line() {
        let text = format!(
            "{HEADER}a\ta.jpg\tnot-a-time\t\tu\t0\nb\tb.jpg\n\
             c\tc.jpg\t2024-03-01T07:30:00\t\tu\t2\n\
             d\td.jpg\t2024-03-01T07:30:00\t\tu\t0\nd\td.jpg\t2024-03-01T07:31:00\t\tu\t0\n"
        );
        match parse_manifest(&text).unwrap_err() {
            Error::Parse { issues, .. } => {
                let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
                assert_eq!(lines, [2, 3, 4, 6]);
                assert!(issues[3].message.contains("duplicate"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_header_and_file() {
        assert!(parse_manifest("a\ta.jpg\t2024-03-01T07:30:00\t\tu\t0\n").is_err());
        assert!(matches!(
            load_manifest(Path::new("/nonexistent/manifest.tsv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let text = format!(
            "{HEADER}a\ta.jpg\t2024-03-01T07:30:00\t\tu\t0\nb\tb.jpg\t2024-03-01T07:31:00\tTV\tu\t1\n"
        );
        let ds = parse_manifest(&text).unwrap();
        assert_eq!(manifest_text(&ds), text);
        assert_eq!(parse_manifest(&manifest_text(&ds)).unwrap(), ds);
    }
}
