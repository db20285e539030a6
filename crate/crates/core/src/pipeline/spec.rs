use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{Blocks, DEFAULT_BINS};
use crate::pixel::{SgdConfig, DEFAULT_SIDE};
use crate::rng::key_of;
use crate::tabular::ForestConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Knn,
    Rdf,
    Softmax,
    ClassicEnsemble,
    LateFusion,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Knn,
        ClassifierKind::Rdf,
        ClassifierKind::Softmax,
        ClassifierKind::ClassicEnsemble,
        ClassifierKind::LateFusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Rdf => "rdf",
            ClassifierKind::Softmax => "softmax",
            ClassifierKind::ClassicEnsemble => "classic-ensemble",
            ClassifierKind::LateFusion => "late-fusion",
        }
    }

    /// Whether a pixel-probability source is part of the pipeline.
    pub fn uses_pixels(self) -> bool {
        matches!(
            self,
            ClassifierKind::Softmax | ClassifierKind::ClassicEnsemble | ClassifierKind::LateFusion
        )
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown classifier `{s}` (knn, rdf, softmax, classic-ensemble, late-fusion)"
                ))
            })
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifier choice plus every hyperparameter that shapes training.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub classifier: ClassifierKind,
    /// Feature blocks of the tabular stage. The classic ensemble's forest
    /// uses the non-probability blocks; softmax ignores this field.
    pub blocks: Blocks,
    pub k: usize,
    pub forest: ForestConfig,
    pub sgd: SgdConfig,
    pub side: usize,
    pub bins: usize,
    /// Read probabilities from an external table instead of training the
    /// built-in softmax model.
    pub external_probabilities: bool,
    /// Train the fusion forest on out-of-fold probabilities from this many
    /// folds instead of in-sample ones.
    pub stacked_folds: Option<usize>,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            classifier: ClassifierKind::LateFusion,
            blocks: Blocks::ALL,
            k: 3,
            forest: ForestConfig::default(),
            sgd: SgdConfig::default(),
            side: DEFAULT_SIDE,
            bins: DEFAULT_BINS,
            external_probabilities: false,
            stacked_folds: None,
        }
    }
}

fn parse_num<N: FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "`{key}` expects true or false, got `{value}`"
        ))),
    }
}

fn optional<N: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<N>> {
    if value == none {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

impl PipelineSpec {
    /// The blocks the tabular stage actually consumes.
    pub fn tabular_blocks(&self) -> Blocks {
        match self.classifier {
            ClassifierKind::Softmax => Blocks::default(),
            ClassifierKind::ClassicEnsemble => self.blocks.without_probabilities(),
            _ => self.blocks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tab = self.tabular_blocks();
        match self.classifier {
            ClassifierKind::Knn | ClassifierKind::Rdf if self.blocks.probabilities => {
                return Err(Error::Config(format!(
                    "{} takes metadata and histogram blocks only; use late-fusion for probabilities",
                    self.classifier
                )))
            }
            ClassifierKind::Softmax => {}
            _ if tab.is_empty() => {
                return Err(Error::Config(format!("{} needs at least one feature block", self.classifier)))
            }
            _ => {}
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.side == 0 || self.bins == 0 {
            return Err(Error::Config("side and bins must be at least 1".into()));
        }
        if self.forest.n_trees == 0
            || self.forest.min_leaf == 0
            || self.forest.features_per_split == Some(0)
        {
            return Err(Error::Config(
                "trees, min_leaf and features_per_split must be at least 1".into(),
            ));
        }
        if matches!(self.stacked_folds, Some(f) if f < 2) {
            return Err(Error::Config(
                "stacked_folds must be at least 2 (or 0 to disable)".into(),
            ));
        }
        self.sgd.validate()
    }

    pub fn needs_histogram(&self) -> bool {
        self.tabular_blocks().histogram
    }

    pub fn needs_pixels(&self) -> bool {
        self.classifier.uses_pixels() && !self.external_probabilities
    }

    pub fn needs_table(&self) -> bool {
        self.classifier.uses_pixels() && self.external_probabilities
    }

    /// Gives the forest and the SGD loop seeds derived from `seed`, so that
    /// one experiment seed drives every randomized stage independently.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed ^ key_of("forest");
        self.sgd.seed = seed ^ key_of("softmax");
        self
    }

    /// Sets one `key=value` setting; returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "classifier" => self.classifier = value.parse()?,
            "blocks" => self.blocks = value.parse()?,
            "k" => self.k = parse_num(key, value)?,
            "trees" => self.forest.n_trees = parse_num(key, value)?,
            "features_per_split" => self.forest.features_per_split = optional(key, value, "auto")?,
            "bootstrap" => self.forest.bootstrap = parse_bool(key, value)?,
            "min_leaf" => self.forest.min_leaf = parse_num(key, value)?,
            "max_depth" => self.forest.max_depth = optional(key, value, "none")?,
            "forest_seed" => self.forest.seed = parse_num(key, value)?,
            "side" => self.side = parse_num(key, value)?,
            "bins" => self.bins = parse_num(key, value)?,
            "learning_rate" => self.sgd.learning_rate = parse_num(key, value)?,
            "momentum" => self.sgd.momentum = parse_num(key, value)?,
            "weight_decay" => self.sgd.weight_decay = parse_num(key, value)?,
            "iterations" => self.sgd.iterations = parse_num(key, value)?,
            "batch_size" => self.sgd.batch_size = parse_num(key, value)?,
            "backtracking" => self.sgd.backtracking = parse_bool(key, value)?,
            "sgd_seed" => self.sgd.seed = parse_num(key, value)?,
            "external_probabilities" => self.external_probabilities = parse_bool(key, value)?,
            "stacked_folds" => {
                self.stacked_folds = match parse_num::<usize>(key, value)? {
                    0 => None,
                    f => Some(f),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Every setting, defaults included, in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("classifier", self.classifier.to_string()),
            ("blocks", self.blocks.to_string()),
            ("k", self.k.to_string()),
            ("trees", self.forest.n_trees.to_string()),
            (
                "features_per_split",
                self.forest
                    .features_per_split
                    .map_or("auto".into(), |v| v.to_string()),
            ),
            ("bootstrap", self.forest.bootstrap.to_string()),
            ("min_leaf", self.forest.min_leaf.to_string()),
            (
                "max_depth",
                self.forest
                    .max_depth
                    .map_or("none".into(), |v| v.to_string()),
            ),
            ("forest_seed", self.forest.seed.to_string()),
            ("side", self.side.to_string()),
            ("bins", self.bins.to_string()),
            ("learning_rate", self.sgd.learning_rate.to_string()),
            ("momentum", self.sgd.momentum.to_string()),
            ("weight_decay", self.sgd.weight_decay.to_string()),
            ("iterations", self.sgd.iterations.to_string()),
            ("batch_size", self.sgd.batch_size.to_string()),
            ("backtracking", self.sgd.backtracking.to_string()),
            ("sgd_seed", self.sgd.seed.to_string()),
            (
                "external_probabilities",
                self.external_probabilities.to_string(),
            ),
            ("stacked_folds", self.stacked_folds.unwrap_or(0).to_string()),
        ]
    }
}
