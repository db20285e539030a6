use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::inputs::{prepare_inputs, InputNeeds, RecordInputs};
use super::model::{fit_pipeline, Pipeline};
use super::predictions::{Prediction, PredictionSet};
use super::spec::PipelineSpec;
use crate::dataset::{
    load_manifest, stratified_split_with, Dataset, ImageRecord, Partition, SplitAssignment,
    SplitOptions, SplitRatios,
};
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::pixel::{load_probability_table, DirectoryImages, ImageSource, ProbabilityTable};
use crate::rng::fingerprint;
use crate::scalar::Scalar;
use crate::tabular::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!(
                "precision must be f32 or f64, got `{s}`"
            ))),
        }
    }
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

/// One experiment: data locations, split, pipeline and output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Manifest file; image paths resolve against `images` or, by default,
    /// the manifest's directory.
    pub dataset: PathBuf,
    pub images: Option<PathBuf>,
    /// External probability table; implies `external_probabilities`.
    pub probabilities: Option<PathBuf>,
    /// Existing split file; otherwise a stratified split is drawn.
    pub split: Option<PathBuf>,
    pub ratios: SplitRatios,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub precision: Precision,
    pub pipeline: PipelineSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            images: None,
            probabilities: None,
            split: None,
            ratios: SplitRatios::default(),
            seed: None,
            out: PathBuf::from("out"),
            precision: Precision::default(),
            pipeline: PipelineSpec::default(),
        }
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "images" => self.images = optional_path(value),
            "probabilities" => self.probabilities = optional_path(value),
            "split" => self.split = optional_path(value),
            "ratios" => self.ratios = value.parse()?,
            "seed" => {
                self.seed = Some(value.parse().map_err(|_| {
                    Error::Config(format!("seed must be an unsigned integer, got `{value}`"))
                })?)
            }
            "out" => self.out = PathBuf::from(value),
            "precision" => self.precision = value.parse()?,
            _ => {
                if !self.pipeline.set(key, value)? {
                    return Err(Error::Config(format!("unknown setting `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v)
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in crate::io::numbered_lines(text) {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            cfg.apply(line)
                .map_err(|e| Error::parse_line("config", n, e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }

    /// Every setting with defaults materialized. Parses back to `self`.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        };
        let mut out = format!(
            "dataset={}\nimages={}\nprobabilities={}\nsplit={}\nratios={}\nseed={}\nout={}\nprecision={}\n",
            self.dataset.display(),
            path(&self.images),
            path(&self.probabilities),
            path(&self.split),
            self.ratios,
            self.seed.map_or("none".to_string(), |s| s.to_string()),
            self.out.display(),
            self.precision.as_str(),
        );
        for (k, v) in self.pipeline.pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    /// Fills in everything derived from other settings: the stage seeds and
    /// the external-probabilities flag. Fails without a seed.
    pub fn resolved(&self) -> Result<Self> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("a seed is required for training".into()))?;
        let mut cfg = self.clone();
        cfg.pipeline = cfg.pipeline.with_seed(seed);
        if cfg.probabilities.is_some() {
            cfg.pipeline.external_probabilities = true;
        }
        if cfg.pipeline.external_probabilities && cfg.probabilities.is_none() {
            return Err(Error::Config(
                "external_probabilities needs a `probabilities` table".into(),
            ));
        }
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    pub fn image_root(&self) -> PathBuf {
        self.images.clone().unwrap_or_else(|| {
            self.dataset
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub probabilities_fingerprint: Option<String>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        format!(
            "config_hash={}\nseed={}\ndataset_fingerprint={}\nprobabilities_fingerprint={}\ntool_version={}\n",
            self.config_hash,
            self.seed,
            self.dataset_fingerprint,
            self.probabilities_fingerprint.as_deref().unwrap_or("none"),
            env!("CARGO_PKG_VERSION"),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub predictions: PredictionSet,
    pub run: RunManifest,
}

fn file_fingerprint(path: &Path) -> Result<String> {
    std::fs::read(path)
        .map(|bytes| fingerprint(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn input_needs(spec: &PipelineSpec) -> InputNeeds {
    InputNeeds {
        histogram_bins: spec.needs_histogram().then_some(spec.bins),
        pixel_side: spec.needs_pixels().then_some(spec.side),
    }
}

/// Inputs for `records` under `spec`, reading images and the table as needed.
pub fn inputs_for<T: Scalar>(
    spec: &PipelineSpec,
    records: &[&ImageRecord],
    images: &dyn ImageSource,
    table: Option<&ProbabilityTable<T>>,
) -> Result<Vec<RecordInputs<T>>> {
    let needs = input_needs(spec);
    let table = if spec.needs_table() { table } else { None };
    if spec.needs_table() && table.is_none() {
        return Err(Error::Config(
            "pipeline expects an external probability table".into(),
        ));
    }
    prepare_inputs(
        records,
        needs.needs_images().then_some(images),
        needs,
        table,
    )
}

/// Predictions for every non-deleted record of `dataset`.
pub fn predict_dataset<T: Scalar>(
    pipeline: &Pipeline<T>,
    dataset: &Dataset,
    images: &dyn ImageSource,
    table: Option<&ProbabilityTable<T>>,
) -> Result<PredictionSet> {
    if dataset.label_set() != pipeline.label_set() {
        return Err(Error::LabelSet(
            "dataset and model label sets differ".into(),
        ));
    }
    let records: Vec<&ImageRecord> = dataset.records().iter().filter(|r| !r.deleted).collect();
    let inputs = inputs_for(pipeline.spec(), &records, images, table)?;
    let refs: Vec<&RecordInputs<T>> = inputs.iter().collect();
    let probs = pipeline.predict_all(&refs)?;
    Ok(PredictionSet {
        label_set: pipeline.label_set().clone(),
        rows: records
            .iter()
            .zip(probs)
            .map(|(r, p)| Prediction {
                id: r.id.clone(),
                truth: dataset.class_of(r),
                predicted: argmax(&p),
                probabilities: p.into_iter().map(Scalar::as_f64).collect(),
            })
            .collect(),
    })
}

/// Split → features → train → evaluate, writing every artifact under
/// `config.out`: the resolved config, split, model, predictions, metrics,
/// confusion matrices and a run manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    match config.precision {
        Precision::F32 => run_typed::<f32>(config),
        Precision::F64 => run_typed::<f64>(config),
    }
}

fn run_typed<T: Scalar>(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let config = config.resolved()?;
    let seed = config.seed.expect("resolved config has a seed");
    let dataset = load_manifest(&config.dataset)?;
    let table: Option<ProbabilityTable<T>> = config
        .probabilities
        .as_deref()
        .map(|p| load_probability_table(p, dataset.label_set()))
        .transpose()?;
    let split = match &config.split {
        Some(path) => SplitAssignment::load(path)?,
        None => stratified_split_with(
            &dataset,
            config.ratios,
            seed,
            SplitOptions {
                skip_empty_classes: true,
                ..Default::default()
            },
        )?,
    };
    let images = DirectoryImages::new(config.image_root());
    let (report, cm, predictions, pipeline) =
        train_and_evaluate(&config.pipeline, &dataset, &split, &images, table.as_ref())?;

    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let config_text = config.to_text();
    let run = RunManifest {
        config_hash: fingerprint(config_text.as_bytes()),
        seed,
        dataset_fingerprint: file_fingerprint(&config.dataset)?,
        probabilities_fingerprint: config
            .probabilities
            .as_deref()
            .map(file_fingerprint)
            .transpose()?,
    };
    let write = |name: &str, text: &str| write_atomic(&config.out.join(name), text.as_bytes());
    write("config.txt", &config_text)?;
    write("split.tsv", &split.to_text())?;
    write("model.txt", &pipeline.to_text())?;
    write("predictions.tsv", &predictions.to_text())?;
    write("metrics.csv", &report.to_csv())?;
    write("confusion.csv", &cm.to_csv())?;
    write("confusion_counts.csv", &cm.counts_csv())?;
    write("run.txt", &run.to_text())?;
    Ok(ExperimentOutcome {
        config,
        report,
        confusion: cm,
        predictions,
        run,
    })
}

/// Fits on the split's training records and evaluates on its test records.
pub fn train_and_evaluate<T: Scalar>(
    spec: &PipelineSpec,
    dataset: &Dataset,
    split: &SplitAssignment,
    images: &dyn ImageSource,
    table: Option<&ProbabilityTable<T>>,
) -> Result<(MetricsReport, ConfusionMatrix, PredictionSet, Pipeline<T>)> {
    let part = |p: Partition| -> Vec<(&ImageRecord, usize)> {
        dataset
            .labeled()
            .into_iter()
            .filter(|(r, _)| split.get(&r.id) == Some(p))
            .collect()
    };
    let train = part(Partition::Train);
    let test = part(Partition::Test);
    if test.is_empty() {
        return Err(Error::EmptyInput("the split has no test records".into()));
    }
    let train_records: Vec<&ImageRecord> = train.iter().map(|t| t.0).collect();
    let train_labels: Vec<usize> = train.iter().map(|t| t.1).collect();
    let train_inputs = inputs_for(spec, &train_records, images, table)?;
    let pipeline = fit_pipeline(
        spec,
        dataset.label_set(),
        &train_inputs.iter().collect::<Vec<_>>(),
        &train_labels,
    )?;
    drop(train_inputs);

    let test_records: Vec<&ImageRecord> = test.iter().map(|t| t.0).collect();
    let truth: Vec<usize> = test.iter().map(|t| t.1).collect();
    let test_inputs = inputs_for(spec, &test_records, images, table)?;
    let probs = pipeline.predict_all(&test_inputs.iter().collect::<Vec<_>>())?;
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let cm = crate::metrics::confusion(&predicted, &truth, dataset.label_set())?;
    let predictions = PredictionSet {
        label_set: dataset.label_set().clone(),
        rows: test_records
            .iter()
            .zip(&truth)
            .zip(probs)
            .map(|((r, &t), p)| Prediction {
                id: r.id.clone(),
                truth: Some(t),
                predicted: argmax(&p),
                probabilities: p.into_iter().map(Scalar::as_f64).collect(),
            })
            .collect(),
    };
    Ok((cm.report(), cm, predictions, pipeline))
}
