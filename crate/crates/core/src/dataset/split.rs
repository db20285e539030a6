use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::Timelike;
use rand::seq::SliceRandom;

use super::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::io::{numbered_lines, read_text, write_atomic};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "validation" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(Error::Config(format!("unknown partition `{other}`"))),
        }
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios([f64; 3]);

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = [train, validation, test];
        if r.iter().any(|&x| !(x > 0.0) || !x.is_finite())
            || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Ratios(r));
        }
        Ok(Self(r))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for SplitRatios {
    /// 75% train, 5% validation, 20% test.
    fn default() -> Self {
        Self([0.75, 0.05, 0.20])
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("ratios `{s}` are not three decimals")))?;
        match parts[..] {
            [a, b, c] => SplitRatios::new(a, b, c),
            _ => Err(Error::Config(format!("ratios `{s}` must have three parts"))),
        }
    }
}

impl std::fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Largest-remainder apportionment of `n` items over the ratios. Leftover
/// units go to the largest fractional quotas, earlier partitions first on ties.
pub fn apportion(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = ratios.0.map(|r| n as f64 * r);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitOptions {
    /// Keep records of one class inside the same `chunk_minutes` window of a
    /// day together, so near-duplicate consecutive frames never straddle
    /// partitions. Partition sizes then only approximate the ratios.
    pub chunk_minutes: Option<u32>,
    /// Skip label-set classes without records instead of failing.
    pub skip_empty_classes: bool,
}

/// Partition of every usable record id.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    assignment: BTreeMap<String, Partition>,
    seed: u64,
    ratios: SplitRatios,
}

impl SplitAssignment {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ratios(&self) -> SplitRatios {
        self.ratios
    }

    pub fn get(&self, id: &str) -> Option<Partition> {
        self.assignment.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Partition)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn ids(&self, partition: Partition) -> impl Iterator<Item = &str> {
        self.iter()
            .filter(move |(_, p)| *p == partition)
            .map(|(id, _)| id)
    }

    /// Usable records of `dataset` in `partition`, chronologically.
    pub fn subset(&self, dataset: &Dataset, partition: Partition) -> Dataset {
        dataset.filtered(|r| r.is_usable() && self.get(&r.id) == Some(partition))
    }

    /// `#seed:` and `#ratios:` headers followed by `id<TAB>partition` lines in id order.
    pub fn to_text(&self) -> String {
        let mut out = format!("#seed:{}\n#ratios:{}\n", self.seed, self.ratios);
        for (id, p) in self.iter() {
            let _ = writeln!(out, "{id}\t{}", p.as_str());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut ratios = None;
        let mut assignment = BTreeMap::new();
        for (n, line) in numbered_lines(text) {
            if let Some(s) = line.strip_prefix("#seed:") {
                seed = Some(
                    s.trim()
                        .parse()
                        .map_err(|_| Error::parse_line("split", n, "bad seed"))?,
                );
            } else if let Some(s) = line.strip_prefix("#ratios:") {
                ratios = Some(s.parse()?);
            } else if !line.starts_with('#') {
                let (id, p) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse_line("split", n, "expected `id<TAB>partition`"))?;
                let p = p
                    .parse()
                    .map_err(|e: Error| Error::parse_line("split", n, e.to_string()))?;
                if assignment.insert(id.to_string(), p).is_some() {
                    return Err(Error::parse_line(
                        "split",
                        n,
                        format!("duplicate id `{id}`"),
                    ));
                }
            }
        }
        Ok(Self {
            assignment,
            seed: seed.ok_or_else(|| Error::parse_line("split", 1, "missing #seed header"))?,
            ratios: ratios
                .ok_or_else(|| Error::parse_line("split", 1, "missing #ratios header"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }
}

/// Per-class shuffled split of usable records, sized by [`apportion`].
pub fn stratified_split(
    dataset: &Dataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    stratified_split_with(dataset, ratios, seed, SplitOptions::default())
}

pub fn stratified_split_with(
    dataset: &Dataset,
    ratios: SplitRatios,
    seed: u64,
    options: SplitOptions,
) -> Result<SplitAssignment> {
    let k = dataset.label_set().len();
    let mut by_class: Vec<Vec<&ImageRecord>> = vec![Vec::new(); k];
    for (r, c) in dataset.labeled() {
        by_class[c].push(r);
    }
    let mut assignment = BTreeMap::new();
    for (class, members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            if options.skip_empty_classes {
                continue;
            }
            return Err(Error::EmptyClass(
                dataset.label_set().name(class).to_string(),
            ));
        }
        let targets = apportion(members.len(), &ratios);
        let mut rng = stream_rng(seed, class as u64);
        match options.chunk_minutes {
            None => {
                let mut members = members;
                members.shuffle(&mut rng);
                let mut it = members.into_iter();
                for (p, &n) in Partition::ALL.iter().zip(&targets) {
                    for r in it.by_ref().take(n) {
                        assignment.insert(r.id.clone(), *p);
                    }
                }
            }
            Some(minutes) => {
                let minutes = minutes.max(1);
                let mut chunks: BTreeMap<(chrono::NaiveDate, u32), Vec<&ImageRecord>> =
                    BTreeMap::new();
                for r in members {
                    let t = r.timestamp;
                    let slot = (t.hour() * 60 + t.minute()) / minutes;
                    chunks.entry((t.date(), slot)).or_default().push(r);
                }
                let mut chunks: Vec<Vec<&ImageRecord>> = chunks.into_values().collect();
                chunks.shuffle(&mut rng);
                let mut filled = [0usize; 3];
                for chunk in chunks {
                    let p = (0..3)
                        .find(|&i| filled[i] + chunk.len() <= targets[i])
                        .unwrap_or_else(|| {
                            (0..3)
                                .max_by_key(|&i| {
                                    (targets[i] as i64 - filled[i] as i64, std::cmp::Reverse(i))
                                })
                                .expect("three partitions")
                        });
                    filled[p] += chunk.len();
                    for r in chunk {
                        assignment.insert(r.id.clone(), Partition::ALL[p]);
                    }
                }
            }
        }
    }
    Ok(SplitAssignment {
        assignment,
        seed,
        ratios,
    })
}
