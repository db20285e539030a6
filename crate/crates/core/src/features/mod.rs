//! Contextual metadata, color histograms, scaling and block assembly.

mod blocks;
mod cache;
mod histogram;
mod scaler;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use blocks::{assemble_row, assemble_rows, BlockInputs, Blocks};
pub use cache::{read_feature_cache, write_feature_cache, FeatureCache};
pub use histogram::{color_histogram, ColorHistogram, DEFAULT_BINS};
pub use scaler::{fit_minmax_scaler, FeatureScaler};

/// Day of week (Monday = 0), hour and minute of a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetadataFeatures {
    pub day_of_week: u8,
    pub hour: u8,
    pub minute: u8,
}

impl MetadataFeatures {
    pub const LEN: usize = 3;

    pub fn to_vec<T: Scalar>(self) -> Vec<T> {
        vec![
            T::of(self.day_of_week as f64),
            T::of(self.hour as f64),
            T::of(self.minute as f64),
        ]
    }
}

pub fn extract_metadata(timestamp: &NaiveDateTime) -> MetadataFeatures {
    MetadataFeatures {
        day_of_week: timestamp.weekday().num_days_from_monday() as u8,
        hour: timestamp.hour() as u8,
        minute: timestamp.minute() as u8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    Probabilities,
    Metadata,
    Histogram,
}

impl BlockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Probabilities => "probabilities",
            BlockKind::Metadata => "metadata",
            BlockKind::Histogram => "histogram",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "probabilities" => Ok(BlockKind::Probabilities),
            "metadata" => Ok(BlockKind::Metadata),
            "histogram" => Ok(BlockKind::Histogram),
            other => Err(Error::Layout(format!("unknown block `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpan {
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Where each block sits inside an assembled feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureLayout {
    blocks: Vec<BlockSpan>,
}

impl FeatureLayout {
    /// Builds a contiguous layout from `(kind, len)` pairs in order.
    pub fn from_lengths(blocks: &[(BlockKind, usize)]) -> Result<Self> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(blocks.len());
        for &(kind, len) in blocks {
            if out.iter().any(|b: &BlockSpan| b.kind == kind) {
                return Err(Error::Layout(format!("block `{}` repeated", kind.as_str())));
            }
            out.push(BlockSpan { kind, offset, len });
            offset += len;
        }
        Ok(Self { blocks: out })
    }

    pub fn blocks(&self) -> &[BlockSpan] {
        &self.blocks
    }

    pub fn total_len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn block(&self, kind: BlockKind) -> Option<&BlockSpan> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    /// `kind:offset:len` entries joined by commas.
    pub fn to_text(&self) -> String {
        self.blocks
            .iter()
            .map(|b| format!("{}:{}:{}", b.kind.as_str(), b.offset, b.len))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let fields: Vec<&str> = part.split(':').collect();
            let [kind, offset, len] = fields[..] else {
                return Err(Error::Layout(format!("bad layout entry `{part}`")));
            };
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Layout(format!("bad number in `{part}`")))
            };
            blocks.push(BlockSpan {
                kind: BlockKind::parse(kind)?,
                offset: num(offset)?,
                len: num(len)?,
            });
        }
        let layout =
            Self::from_lengths(&blocks.iter().map(|b| (b.kind, b.len)).collect::<Vec<_>>())?;
        if layout.blocks != blocks {
            return Err(Error::Layout(format!(
                "blocks in `{text}` are not contiguous"
            )));
        }
        Ok(layout)
    }
}

/// Concatenates the present blocks in the fixed order
/// probabilities, metadata, histogram.
pub fn assemble_features<T: Scalar>(
    probabilities: Option<&[T]>,
    metadata: Option<&MetadataFeatures>,
    histogram: Option<&ColorHistogram<T>>,
) -> Result<(Vec<T>, FeatureLayout)> {
    let mut row = Vec::new();
    let mut spans = Vec::new();
    if let Some(p) = probabilities {
        spans.push((BlockKind::Probabilities, p.len()));
        row.extend_from_slice(p);
    }
    if let Some(m) = metadata {
        spans.push((BlockKind::Metadata, MetadataFeatures::LEN));
        row.extend(m.to_vec::<T>());
    }
    if let Some(h) = histogram {
        spans.push((BlockKind::Histogram, h.values().len()));
        row.extend_from_slice(h.values());
    }
    if spans.is_empty() {
        return Err(Error::Layout(
            "at least one feature block is required".into(),
        ));
    }
    Ok((row, FeatureLayout::from_lengths(&spans)?))
}
