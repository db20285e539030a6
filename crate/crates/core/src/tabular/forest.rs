//! Random decision forest: CART trees grown on bootstrap samples with Gini
//! impurity and a random feature subset per split, soft-voted at predict time.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::{parse_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features examined per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            features_per_split: None,
            bootstrap: true,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_features_per_split(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .max(1)
    }

    fn to_text(&self) -> String {
        format!(
            "n_trees={} features_per_split={} bootstrap={} min_leaf={} max_depth={} seed={}",
            self.n_trees,
            self.features_per_split
                .map_or("auto".into(), |v| v.to_string()),
            self.bootstrap,
            self.min_leaf,
            self.max_depth.map_or("none".into(), |v| v.to_string()),
            self.seed
        )
    }

    fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ForestConfig::default();
        let bad = |kv: &str| Error::Config(format!("bad forest config entry `{kv}`"));
        for kv in text.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(kv))?;
            match k {
                "n_trees" => cfg.n_trees = v.parse().map_err(|_| bad(kv))?,
                "features_per_split" => {
                    cfg.features_per_split = if v == "auto" {
                        None
                    } else {
                        Some(v.parse().map_err(|_| bad(kv))?)
                    }
                }
                "bootstrap" => cfg.bootstrap = v.parse().map_err(|_| bad(kv))?,
                "min_leaf" => cfg.min_leaf = v.parse().map_err(|_| bad(kv))?,
                "max_depth" => {
                    cfg.max_depth = if v == "none" {
                        None
                    } else {
                        Some(v.parse().map_err(|_| bad(kv))?)
                    }
                }
                "seed" => cfg.seed = v.parse().map_err(|_| bad(kv))?,
                _ => return Err(bad(kv)),
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    /// Rows with `row[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Sparse `(class, count)` pairs of the training sample reaching the leaf.
    Leaf { counts: Vec<(usize, u32)> },
}

/// One tree as a node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[T]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                TreeNode::Leaf { .. } => return at,
            }
        }
    }

    fn add_leaf_distribution(&self, row: &[T], acc: &mut [T]) {
        if let TreeNode::Leaf { counts } = &self.nodes[self.leaf_index(row)] {
            let total: u32 = counts.iter().map(|(_, n)| n).sum();
            let total = T::of(total as f64);
            for &(c, n) in counts {
                acc[c] = acc[c] + T::of(n as f64) / total;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    trees: Vec<Tree<T>>,
    config: ForestConfig,
    n_classes: usize,
    n_features: usize,
}

/// Grows `config.n_trees` trees in parallel. Tree `t` draws all of its
/// randomness from stream `t` of `config.seed`, so the forest does not
/// depend on scheduling.
pub fn forest_fit<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[usize],
    n_classes: usize,
    config: &ForestConfig,
) -> Result<RandomForest<T>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(
            "forest needs at least one training row".into(),
        ));
    }
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            found: labels.len(),
        });
    }
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(Error::Config(
            "n_trees and min_leaf must be at least 1".into(),
        ));
    }
    if n_classes == 0 {
        return Err(Error::Config("forest needs at least one class".into()));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::Config("rows have no features".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: r.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Config(format!(
            "label index {bad} outside {n_classes} classes"
        )));
    }
    let mtry = config.resolved_features_per_split(d);
    if config.features_per_split == Some(0) || mtry > d {
        return Err(Error::Config(format!(
            "features_per_split = {mtry} must be in 1..={d}"
        )));
    }
    let columns: Vec<Vec<T>> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let grower = Grower {
        columns: &columns,
        labels,
        n_classes,
        mtry,
        min_leaf: config.min_leaf,
        max_depth: config.max_depth,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(config.seed, t as u64);
            let n = labels.len();
            let sample: Vec<u32> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            grower.grow(sample, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        config: config.clone(),
        n_classes,
        n_features: d,
    })
}

struct Grower<'a, T> {
    columns: &'a [Vec<T>],
    labels: &'a [usize],
    n_classes: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    /// `sum_l^2/n_l + sum_r^2/n_r`; larger means lower weighted Gini impurity.
    purity: f64,
}

impl<T: Scalar> Candidate<T> {
    fn beats(&self, other: &Candidate<T>) -> bool {
        match self.purity.total_cmp(&other.purity) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                (self.feature, self.threshold.as_f64()) < (other.feature, other.threshold.as_f64())
            }
        }
    }
}

impl<T: Scalar> Grower<'_, T> {
    fn grow(&self, sample: Vec<u32>, rng: &mut impl Rng) -> Tree<T> {
        let mut nodes: Vec<TreeNode<T>> = vec![TreeNode::Leaf { counts: Vec::new() }];
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        let mut pairs: Vec<(T, u32)> = Vec::new();
        // (node slot, sample, depth); depth-first, left child first.
        let mut stack = vec![(0usize, sample, 0usize)];
        while let Some((slot, sample, depth)) = stack.pop() {
            let counts = self.class_counts(&sample);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_ok = self.max_depth.is_none_or(|m| depth < m);
            let split = if !pure && depth_ok && sample.len() >= 2 * self.min_leaf {
                self.best_split(&sample, &counts, &mut order, &mut pairs, rng)
            } else {
                None
            };
            match split {
                None => {
                    nodes[slot] = TreeNode::Leaf {
                        counts: counts
                            .iter()
                            .enumerate()
                            .filter(|(_, &n)| n > 0)
                            .map(|(c, &n)| (c, n))
                            .collect(),
                    };
                }
                Some(best) => {
                    let column = &self.columns[best.feature];
                    let (left, right): (Vec<u32>, Vec<u32>) = sample
                        .into_iter()
                        .partition(|&i| column[i as usize] <= best.threshold);
                    let l = nodes.len();
                    nodes.push(TreeNode::Leaf { counts: Vec::new() });
                    nodes.push(TreeNode::Leaf { counts: Vec::new() });
                    nodes[slot] = TreeNode::Split {
                        feature: best.feature,
                        threshold: best.threshold,
                        left: l,
                        right: l + 1,
                    };
                    stack.push((l + 1, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
            }
        }
        Tree { nodes }
    }

    fn class_counts(&self, sample: &[u32]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in sample {
            counts[self.labels[i as usize]] += 1;
        }
        counts
    }

    /// Examines features in a fresh random order until `mtry` features that
    /// vary within the node have been seen (or all are exhausted).
    fn best_split(
        &self,
        sample: &[u32],
        parent: &[u32],
        order: &mut [usize],
        pairs: &mut Vec<(T, u32)>,
        rng: &mut impl Rng,
    ) -> Option<Candidate<T>> {
        order.shuffle(rng);
        let n = sample.len();
        let mut best: Option<Candidate<T>> = None;
        let mut varying = 0;
        let mut left = vec![0u32; self.n_classes];
        for &feature in order.iter() {
            if varying == self.mtry {
                break;
            }
            let column = &self.columns[feature];
            pairs.clear();
            pairs.extend(
                sample
                    .iter()
                    .map(|&i| (column[i as usize], self.labels[i as usize] as u32)),
            );
            pairs.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)
            });
            if !(pairs[0].0 < pairs[n - 1].0) {
                continue;
            }
            varying += 1;
            left.iter_mut().for_each(|c| *c = 0);
            let mut sq_left = 0f64;
            let mut sq_right: f64 = parent.iter().map(|&c| (c as f64) * (c as f64)).sum();
            for i in 0..n - 1 {
                let c = pairs[i].1 as usize;
                let a = left[c] as f64;
                let b = (parent[c] - left[c]) as f64;
                sq_left += 2.0 * a + 1.0;
                sq_right -= 2.0 * b - 1.0;
                left[c] += 1;
                let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
                if !(lo < hi) {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let mut threshold = (lo + hi) / T::of(2.0);
                if !(threshold < hi) {
                    threshold = lo;
                }
                let cand = Candidate {
                    feature,
                    threshold,
                    purity: sq_left / n_left as f64 + sq_right / n_right as f64,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

/// Weighted Gini impurity of class counts: `1 - sum p_c^2`.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl<T: Scalar> RandomForest<T> {
    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Builds a forest from explicit trees (used for hand-built models).
    pub fn from_trees(trees: Vec<Tree<T>>, n_classes: usize, n_features: usize) -> Result<Self> {
        let forest = Self {
            config: ForestConfig {
                n_trees: trees.len(),
                ..Default::default()
            },
            trees,
            n_classes,
            n_features,
        };
        forest.validate()?;
        Ok(forest)
    }

    /// Mean over trees of the class frequencies in the reached leaf.
    pub fn predict_proba(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let mut acc = vec![T::zero(); self.n_classes];
        for tree in &self.trees {
            tree.add_leaf_distribution(row, &mut acc);
        }
        let n = T::of(self.trees.len() as f64);
        Ok(acc.into_iter().map(|v| v / n).collect())
    }

    pub fn predict(&self, row: &[T]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("forest: {m}")));
        if self.trees.is_empty() {
            return bad("no trees".into());
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return bad(format!("tree {t} is empty"));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Split {
                        feature,
                        left,
                        right,
                        ..
                    } => {
                        if *feature >= self.n_features
                            || *left <= i
                            || *right <= i
                            || *left >= tree.nodes.len()
                            || *right >= tree.nodes.len()
                        {
                            return bad(format!("tree {t} node {i} has invalid links"));
                        }
                    }
                    TreeNode::Leaf { counts } => {
                        if counts.is_empty()
                            || counts.iter().any(|&(c, n)| c >= self.n_classes || n == 0)
                        {
                            return bad(format!("tree {t} node {i} has invalid counts"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Versioned text form; every node line carries explicit child indices.
    ///
    /// ```text
    /// egoact-forest 1
    /// classes <K>
    /// features <d>
    /// config n_trees=.. features_per_split=.. bootstrap=.. min_leaf=.. max_depth=.. seed=..
    /// tree <node count>
    /// split <feature> <threshold> <left> <right>
    /// leaf <class>:<count> ...
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "egoact-forest 1\nclasses {}\nfeatures {}\nconfig {}\n",
            self.n_classes,
            self.n_features,
            self.config.to_text()
        );
        for tree in &self.trees {
            let _ = writeln!(out, "tree {}", tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "split {feature} {threshold} {left} {right}");
                    }
                    TreeNode::Leaf { counts } => {
                        out.push_str("leaf");
                        for (c, n) in counts {
                            let _ = write!(out, " {c}:{n}");
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::parse_line("forest", line, m);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| bad(0, &format!("missing {what}")))
        };
        let (n, header) = next("header")?;
        if header != "egoact-forest 1" {
            return Err(bad(n, "unsupported header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let (n, l) = next(name)?;
            l.strip_prefix(name)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(n, &format!("expected `{name}`")))
        };
        let n_classes: usize = field("classes")?
            .parse()
            .map_err(|_| bad(2, "bad class count"))?;
        let n_features: usize = field("features")?
            .parse()
            .map_err(|_| bad(3, "bad feature count"))?;
        let config = ForestConfig::from_text(&field("config")?)?;
        let mut trees = Vec::new();
        let mut rest = text
            .lines()
            .enumerate()
            .skip(4)
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.is_empty());
        while let Some((n, line)) = rest.next() {
            let count: usize = line
                .strip_prefix("tree ")
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad(n, "expected `tree <count>`"))?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, line) = rest.next().ok_or_else(|| bad(n, "truncated tree"))?;
                let parts: Vec<&str> = line.split(' ').collect();
                let node = match parts[..] {
                    ["split", f, t, l, r] => TreeNode::Split {
                        feature: f.parse().map_err(|_| bad(n, "bad feature"))?,
                        threshold: parse_scalar(t).ok_or_else(|| bad(n, "bad threshold"))?,
                        left: l.parse().map_err(|_| bad(n, "bad child"))?,
                        right: r.parse().map_err(|_| bad(n, "bad child"))?,
                    },
                    ["leaf", ref cs @ ..] => TreeNode::Leaf {
                        counts: cs
                            .iter()
                            .map(|e| {
                                let (c, k) = e.split_once(':')?;
                                Some((c.parse().ok()?, k.parse().ok()?))
                            })
                            .collect::<Option<_>>()
                            .ok_or_else(|| bad(n, "bad leaf counts"))?,
                    },
                    _ => return Err(bad(n, "expected `split` or `leaf`")),
                };
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        let forest = Self {
            trees,
            config,
            n_classes,
            n_features,
        };
        forest.validate()?;
        if forest.trees.len() != forest.config.n_trees {
            return Err(Error::Config(
                "forest: tree count does not match config".into(),
            ));
        }
        Ok(forest)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tree(bootstrap: bool) -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            bootstrap,
            features_per_split: None,
            ..Default::default()
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let forest = forest_fit(&rows, &labels, 2, &single_tree(false)).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(forest.predict(r).unwrap(), l);
        }
        match &forest.trees()[0].nodes()[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 5.5),
            n => panic!("{n:?}"),
        }
    }

    #[test]
    fn xor_needs_two_levels() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let labels = vec![0, 0, 1, 1];
        let forest = forest_fit(&rows, &labels, 2, &single_tree(false)).unwrap();
        let correct = rows
            .iter()
            .zip(&labels)
            .filter(|(r, &l)| forest.predict(r).unwrap() == l)
            .count();
        assert_eq!(correct, 4);
        // Root split has zero gain; the tree still reaches purity one level down.
        assert_eq!(forest.trees()[0].nodes().len(), 7);
    }

    #[test]
    fn averaging_two_trees() {
        let leaf = |counts: Vec<(usize, u32)>| Tree {
            nodes: vec![TreeNode::Leaf { counts }],
        };
        let forest = RandomForest::<f64>::from_trees(
            vec![leaf(vec![(0, 4)]), leaf(vec![(0, 1), (1, 1)])],
            2,
            1,
        )
        .unwrap();
        assert_eq!(forest.predict_proba(&[0.0]).unwrap(), vec![0.75, 0.25]);
    }

    #[test]
    fn deterministic_and_normalized() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, ((i * 13) % 11) as f64, (i % 3) as f64 * 0.5])
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| (i * 7 + i / 5) % 3).collect();
        let cfg = ForestConfig {
            n_trees: 25,
            seed: 9,
            ..Default::default()
        };
        let a = forest_fit(&rows, &labels, 3, &cfg).unwrap();
        let b = forest_fit(&rows, &labels, 3, &cfg).unwrap();
        assert_eq!(a, b);
        for r in &rows {
            let p = a.predict_proba(r).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(a.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn config_errors() {
        let rows = vec![vec![0.0], vec![1.0]];
        let cfg = ForestConfig {
            features_per_split: Some(2),
            ..single_tree(true)
        };
        assert!(forest_fit(&rows, &[0, 1], 2, &cfg).is_err());
        assert!(forest_fit::<f64>(&[], &[], 2, &single_tree(true)).is_err());
    }

    #[test]
    fn min_leaf_and_depth_limits() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let cfg = ForestConfig {
            min_leaf: 3,
            ..single_tree(false)
        };
        let forest = forest_fit(&rows, &labels, 2, &cfg).unwrap();
        for node in forest.trees()[0].nodes() {
            if let TreeNode::Leaf { counts } = node {
                assert!(counts.iter().map(|c| c.1).sum::<u32>() >= 3);
            }
        }
        let cfg = ForestConfig {
            max_depth: Some(0),
            ..single_tree(false)
        };
        assert_eq!(
            forest_fit(&rows, &labels, 2, &cfg).unwrap().trees()[0]
                .nodes()
                .len(),
            1
        );
    }

    #[test]
    fn text_round_trip() {
        let rows: Vec<Vec<f32>> = (0..30)
            .map(|i| vec![(i as f32).sin(), (i % 4) as f32 / 3.0])
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let cfg = ForestConfig {
            n_trees: 4,
            max_depth: Some(6),
            seed: 3,
            ..Default::default()
        };
        let forest = forest_fit(&rows, &labels, 3, &cfg).unwrap();
        assert_eq!(
            RandomForest::<f32>::from_text(&forest.to_text()).unwrap(),
            forest
        );
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert_eq!(gini(&[2, 2]), 0.5);
        assert_eq!(gini(&[]), 0.0);
    }
}
