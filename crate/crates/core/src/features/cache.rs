//! Feature cache files: a `#layout:` header, then `id` and tab-separated
//! decimals per line.

use std::fmt::Write as _;
use std::path::Path;

use super::FeatureLayout;
use crate::error::{Error, LineIssue, Result};
use crate::io::{numbered_lines, read_text, write_atomic};
use crate::scalar::{parse_scalar, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache<T> {
    pub layout: FeatureLayout,
    pub rows: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> FeatureCache<T> {
    pub fn to_text(&self) -> String {
        let mut out = format!("#layout:{}\n", self.layout.to_text());
        for (id, row) in &self.rows {
            out.push_str(id);
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut layout = None;
        let mut rows = Vec::new();
        let mut issues = Vec::new();
        for (n, line) in numbered_lines(text) {
            if let Some(rest) = line.strip_prefix("#layout:") {
                layout = Some(FeatureLayout::from_text(rest)?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let Some(layout) = &layout else {
                return Err(Error::parse_line(
                    "feature cache",
                    n,
                    "row before `#layout:` header",
                ));
            };
            let mut parts = line.split('\t');
            let id = parts.next().unwrap_or_default().to_string();
            let values: Option<Vec<T>> = parts.map(parse_scalar).collect();
            match values {
                Some(v) if v.len() == layout.total_len() => rows.push((id, v)),
                Some(v) => issues.push(LineIssue {
                    line: n,
                    message: format!("expected {} values, found {}", layout.total_len(), v.len()),
                }),
                None => issues.push(LineIssue {
                    line: n,
                    message: "unparsable value".into(),
                }),
            }
        }
        if !issues.is_empty() {
            return Err(Error::parse("feature cache", issues));
        }
        let layout = layout
            .ok_or_else(|| Error::parse_line("feature cache", 1, "missing `#layout:` header"))?;
        Ok(Self { layout, rows })
    }
}

pub fn write_feature_cache<T: Scalar>(cache: &FeatureCache<T>, path: &Path) -> Result<()> {
    write_atomic(path, cache.to_text().as_bytes())
}

pub fn read_feature_cache<T: Scalar>(path: &Path) -> Result<FeatureCache<T>> {
    FeatureCache::from_text(&read_text(path)?)
}
