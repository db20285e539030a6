use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{assemble_features, BlockKind, ColorHistogram, FeatureLayout, MetadataFeatures};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which feature blocks a tabular model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Blocks {
    pub probabilities: bool,
    pub metadata: bool,
    pub histogram: bool,
}

impl Blocks {
    pub const ALL: Blocks = Blocks {
        probabilities: true,
        metadata: true,
        histogram: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.probabilities || self.metadata || self.histogram)
    }

    pub fn kinds(&self) -> Vec<BlockKind> {
        [
            (self.probabilities, BlockKind::Probabilities),
            (self.metadata, BlockKind::Metadata),
            (self.histogram, BlockKind::Histogram),
        ]
        .into_iter()
        .filter_map(|(on, kind)| on.then_some(kind))
        .collect()
    }

    pub fn without_probabilities(self) -> Blocks {
        Blocks {
            probabilities: false,
            ..self
        }
    }
}

impl FromStr for Blocks {
    type Err = Error;

    /// Comma-separated block names, e.g. `metadata,histogram`.
    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Blocks::default();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match BlockKind::parse(name)? {
                BlockKind::Probabilities => blocks.probabilities = true,
                BlockKind::Metadata => blocks.metadata = true,
                BlockKind::Histogram => blocks.histogram = true,
            }
        }
        Ok(blocks)
    }
}

impl fmt::Display for Blocks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.kinds().into_iter().map(BlockKind::as_str).collect();
        f.write_str(&names.join(","))
    }
}

/// Per-record inputs to block assembly; any block may be missing.
#[derive(Debug, Clone, Copy)]
pub struct BlockInputs<'a, T> {
    pub id: &'a str,
    pub probabilities: Option<&'a [T]>,
    pub metadata: Option<MetadataFeatures>,
    pub histogram: Option<&'a ColorHistogram<T>>,
}

impl<'a, T: Scalar> BlockInputs<'a, T> {
    /// Looks every id up in per-block maps.
    pub fn gather(
        ids: &'a [String],
        probabilities: Option<&'a BTreeMap<String, Vec<T>>>,
        metadata: Option<&'a BTreeMap<String, MetadataFeatures>>,
        histograms: Option<&'a BTreeMap<String, ColorHistogram<T>>>,
    ) -> Vec<Self> {
        ids.iter()
            .map(|id| BlockInputs {
                id,
                probabilities: probabilities.and_then(|m| m.get(id)).map(Vec::as_slice),
                metadata: metadata.and_then(|m| m.get(id)).copied(),
                histogram: histograms.and_then(|m| m.get(id)),
            })
            .collect()
    }
}

/// Assembles one row per input from the selected blocks. Fails with the ids
/// missing from the first incomplete block, or when rows disagree in layout.
pub fn assemble_rows<T: Scalar>(
    inputs: &[BlockInputs<'_, T>],
    blocks: Blocks,
) -> Result<(Vec<Vec<T>>, FeatureLayout)> {
    if blocks.is_empty() {
        return Err(Error::Layout(
            "at least one feature block is required".into(),
        ));
    }
    type Present<T> = fn(&BlockInputs<'_, T>) -> bool;
    let checks: [(bool, BlockKind, Present<T>); 3] = [
        (blocks.probabilities, BlockKind::Probabilities, |i| {
            i.probabilities.is_some()
        }),
        (blocks.metadata, BlockKind::Metadata, |i| {
            i.metadata.is_some()
        }),
        (blocks.histogram, BlockKind::Histogram, |i| {
            i.histogram.is_some()
        }),
    ];
    for (on, kind, present) in checks {
        if !on {
            continue;
        }
        let missing: Vec<String> = inputs
            .iter()
            .filter(|i| !present(i))
            .map(|i| i.id.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Coverage {
                block: kind.as_str().into(),
                ids: missing,
            });
        }
    }
    let mut layout: Option<FeatureLayout> = None;
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let (row, l) = assemble_row(input, blocks)?;
        match &layout {
            Some(expected) if *expected != l => {
                return Err(Error::Layout(format!(
                    "record `{}` has layout {}, expected {}",
                    input.id,
                    l.to_text(),
                    expected.to_text()
                )))
            }
            Some(_) => {}
            None => layout = Some(l),
        }
        rows.push(row);
    }
    let layout = layout.ok_or_else(|| Error::EmptyInput("no records to assemble".into()))?;
    Ok((rows, layout))
}

/// Single-row variant of [`assemble_rows`].
pub fn assemble_row<T: Scalar>(
    input: &BlockInputs<'_, T>,
    blocks: Blocks,
) -> Result<(Vec<T>, FeatureLayout)> {
    let missing = |kind: BlockKind| Error::Coverage {
        block: kind.as_str().into(),
        ids: vec![input.id.to_string()],
    };
    let probabilities = match blocks.probabilities {
        true => Some(
            input
                .probabilities
                .ok_or_else(|| missing(BlockKind::Probabilities))?,
        ),
        false => None,
    };
    let metadata = match blocks.metadata {
        true => Some(input.metadata.ok_or_else(|| missing(BlockKind::Metadata))?),
        false => None,
    };
    let histogram = match blocks.histogram {
        true => Some(
            input
                .histogram
                .ok_or_else(|| missing(BlockKind::Histogram))?,
        ),
        false => None,
    };
    assemble_features(probabilities, metadata.as_ref(), histogram)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let b: Blocks = "metadata, histogram".parse().unwrap();
        assert_eq!(
            b,
            Blocks {
                probabilities: false,
                metadata: true,
                histogram: true
            }
        );
        assert_eq!(b.to_string(), "metadata,histogram");
        assert_eq!(
            Blocks::ALL.to_string().parse::<Blocks>().unwrap(),
            Blocks::ALL
        );
        assert!("pixels".parse::<Blocks>().is_err());
        assert!("".parse::<Blocks>().unwrap().is_empty());
    }

    #[test]
    fn coverage_lists_missing_ids() {
        let meta = MetadataFeatures {
            day_of_week: 1,
            hour: 9,
            minute: 0,
        };
        let p = [0.5, 0.5];
        let inputs = [
            BlockInputs {
                id: "a",
                probabilities: Some(&p[..]),
                metadata: Some(meta),
                histogram: None,
            },
            BlockInputs {
                id: "b",
                probabilities: None,
                metadata: Some(meta),
                histogram: None,
            },
        ];
        let meta_only = Blocks {
            metadata: true,
            ..Blocks::default()
        };
        let (rows, layout) = assemble_rows::<f64>(&inputs, meta_only).unwrap();
        assert_eq!(rows, vec![vec![1.0, 9.0, 0.0]; 2]);
        assert_eq!(layout.total_len(), 3);
        match assemble_rows::<f64>(&inputs, Blocks::ALL).unwrap_err() {
            Error::Coverage { block, ids } => {
                assert_eq!(block, "probabilities");
                assert_eq!(ids, vec!["b".to_string()]);
            }
            e => panic!("{e}"),
        }
        let with_probs = Blocks {
            probabilities: true,
            ..Blocks::default()
        };
        assert!(assemble_rows(&inputs[..1], with_probs).is_ok());
        assert!(assemble_rows::<f64>(&inputs, Blocks::default()).is_err());
    }
}
