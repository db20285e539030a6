//! `egoact` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use egoact::dataset::{
    load_manifest, stratified_split_with, Dataset, ImageRecord, SplitAssignment, SplitOptions,
    SplitRatios,
};
use egoact::experiments::{
    build_timeline, finetune_experiment, fortnight_prefixes, learning_curve,
};
use egoact::features::{assemble_rows, write_feature_cache, Blocks, FeatureCache};
use egoact::io::write_atomic;
use egoact::pipeline::{
    inputs_for, predict_dataset, prepare_inputs, run_experiment, ExperimentConfig, InputNeeds,
    Pipeline, Precision, PredictionSet,
};
use egoact::pixel::{load_probability_table, DirectoryImages, ProbabilityTable};
use egoact::synth::{
    curve_config, generate_lifelog, metadata_only_config, standard_config, user_b_config,
    write_lifelog,
};
use egoact::Scalar;

#[derive(Parser)]
#[command(
    name = "egoact",
    version,
    about = "Daily-activity prediction from egocentric photo streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic lifelog (manifest plus images).
    Synth(SynthArgs),
    /// Write a stratified train/validation/test split.
    Split(SplitArgs),
    /// Write a feature cache for the chosen blocks.
    Features(FeaturesArgs),
    /// Split, train, evaluate and write all run artifacts.
    Train(TrainArgs),
    /// Predict every record of a dataset with a saved model.
    Predict(PredictArgs),
    /// Recompute metrics from a predictions file.
    Evaluate(EvaluateArgs),
    /// Learning curve over cumulative week prefixes.
    Curve(CurveArgs),
    /// Evaluate a model on a new user before and after fine-tuning.
    Finetune(FinetuneArgs),
    /// Predicted activity timeline for one day.
    Timeline(TimelineArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Standard,
    Curve,
    MetadataOnly,
    UserB,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "standard")]
    preset: Preset,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Override the number of days.
    #[arg(long)]
    days: Option<u32>,
    /// Override the image side in pixels.
    #[arg(long)]
    image_size: Option<u32>,
    /// Write only the manifest.
    #[arg(long)]
    manifest_only: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "0.75,0.05,0.2")]
    ratios: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Sources {
    #[arg(long)]
    dataset: PathBuf,
    /// Image root; defaults to the manifest's directory.
    #[arg(long)]
    images: Option<PathBuf>,
    /// External probability table.
    #[arg(long)]
    probabilities: Option<PathBuf>,
}

impl Sources {
    fn image_root(&self) -> PathBuf {
        self.images.clone().unwrap_or_else(|| {
            self.dataset
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    sources: Sources,
    #[arg(long, default_value = "metadata,histogram")]
    blocks: String,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// File of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    sources: Sources,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Comma-separated week counts; defaults to every fortnight.
    #[arg(long)]
    weeks: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Base model trained on the original user.
    #[arg(long)]
    model: PathBuf,
    /// New user's manifest; its first date trains, its second date tests.
    #[command(flatten)]
    sources: Sources,
    #[arg(long)]
    seed: u64,
    /// SGD override such as `iterations=500`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TimelineArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    sources: Sources,
    /// YYYY-MM-DD
    #[arg(long)]
    date: chrono::NaiveDate,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<egoact::Error>() {
            return if core.is_validation() { 1 } else { 2 };
        }
        if let Some(annotate) = cause.downcast_ref::<egoact_annotate::AnnotateError>() {
            return if annotate.is_validation() { 1 } else { 2 };
        }
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
    }
    2
}

/// Invalid command-line input detected outside the library.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(message.into()))
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Split(a) => split(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => with_model_precision(&a.model.clone(), |p| match p {
            Precision::F32 => predict::<f32>(&a),
            Precision::F64 => predict::<f64>(&a),
        }),
        Command::Evaluate(a) => evaluate(a),
        Command::Curve(a) => curve(a),
        Command::Finetune(a) => with_model_precision(&a.model.clone(), |p| match p {
            Precision::F32 => finetune::<f32>(&a),
            Precision::F64 => finetune::<f64>(&a),
        }),
        Command::Timeline(a) => with_model_precision(&a.model.clone(), |p| match p {
            Precision::F32 => timeline::<f32>(&a),
            Precision::F64 => timeline::<f64>(&a),
        }),
        Command::Serve(a) => serve(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = match a.preset {
        Preset::Standard => standard_config(a.seed),
        Preset::Curve => curve_config(a.seed),
        Preset::MetadataOnly => metadata_only_config(a.seed),
        Preset::UserB => user_b_config(a.seed),
    };
    if let Some(days) = a.days {
        cfg.days = days;
    }
    if let Some(size) = a.image_size {
        cfg.image_size = size;
    }
    let life = generate_lifelog(&cfg)?;
    write_lifelog(&life, &a.out, !a.manifest_only).context("writing the lifelog")?;
    println!(
        "{} records written to {}",
        life.dataset.len(),
        a.out.join("manifest.tsv").display()
    );
    Ok(())
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let dataset = load_manifest(&a.dataset)?;
    let ratios: SplitRatios = a.ratios.parse()?;
    let options = SplitOptions {
        skip_empty_classes: true,
        ..Default::default()
    };
    let split = stratified_split_with(&dataset, ratios, a.seed, options)?;
    split.save(&a.out)?;
    println!("{} records assigned", split.len());
    Ok(())
}

fn load_table<T: Scalar>(
    path: Option<&Path>,
    dataset: &Dataset,
) -> anyhow::Result<Option<ProbabilityTable<T>>> {
    Ok(path
        .map(|p| load_probability_table(p, dataset.label_set()))
        .transpose()?)
}

fn live_records(dataset: &Dataset) -> Vec<&ImageRecord> {
    dataset.records().iter().filter(|r| !r.deleted).collect()
}

fn features(a: FeaturesArgs) -> anyhow::Result<()> {
    let dataset = load_manifest(&a.sources.dataset)?;
    let blocks: Blocks = a.blocks.parse()?;
    if blocks.probabilities && a.sources.probabilities.is_none() {
        return Err(usage("the probabilities block needs --probabilities"));
    }
    let table = load_table::<f64>(a.sources.probabilities.as_deref(), &dataset)?;
    let images = DirectoryImages::new(a.sources.image_root());
    let records = live_records(&dataset);
    let needs = InputNeeds {
        histogram_bins: blocks.histogram.then_some(a.bins),
        pixel_side: None,
    };
    let table = if blocks.probabilities {
        table.as_ref()
    } else {
        None
    };
    let inputs = prepare_inputs(&records, Some(&images), needs, table)?;
    let views: Vec<_> = inputs
        .iter()
        .map(|i| i.blocks(i.probabilities.as_deref()))
        .collect();
    let (rows, layout) = assemble_rows(&views, blocks)?;
    let cache = FeatureCache {
        layout,
        rows: inputs.iter().map(|i| i.id.clone()).zip(rows).collect(),
    };
    write_feature_cache(&cache, &a.out)?;
    println!(
        "{} rows of {} features",
        cache.rows.len(),
        cache.layout.total_len()
    );
    Ok(())
}

fn experiment_config(
    config: Option<&Path>,
    overrides: &[String],
    dataset: Option<&Path>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in overrides {
        cfg.apply(o)?;
    }
    if let Some(d) = dataset {
        cfg.dataset = d.to_path_buf();
    }
    if cfg.dataset.as_os_str().is_empty() {
        return Err(usage(
            "no dataset given (use --dataset or `dataset=` in the config)",
        ));
    }
    cfg.seed = Some(seed);
    cfg.out = out.to_path_buf();
    Ok(cfg.resolved()?)
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let cfg = experiment_config(
        a.config.as_deref(),
        &a.overrides,
        a.dataset.as_deref(),
        a.seed,
        &a.out,
    )?;
    let outcome = run_experiment(&cfg)?;
    println!(
        "{}: total accuracy {:.2}%, average class accuracy {:.2}% ({} test records)",
        cfg.pipeline.classifier,
        outcome.report.total_accuracy,
        outcome.report.avg_class_accuracy,
        outcome.predictions.rows.len()
    );
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn with_model_precision(
    path: &Path,
    f: impl FnOnce(Precision) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let text = egoact::io::read_text(path)?;
    let precision = text
        .lines()
        .nth(1)
        .and_then(|l| l.strip_prefix("precision "))
        .ok_or_else(|| {
            egoact::Error::Config(format!("{} is not a pipeline model file", path.display()))
        })?;
    f(precision.parse()?)
}

fn load_model<T: Scalar>(path: &Path) -> anyhow::Result<Pipeline<T>> {
    Ok(Pipeline::from_text(&egoact::io::read_text(path)?)?)
}

fn predict<T: Scalar>(a: &PredictArgs) -> anyhow::Result<()> {
    let model = load_model::<T>(&a.model)?;
    let dataset = load_manifest(&a.sources.dataset)?.with_label_set(model.label_set().clone())?;
    let table = load_table::<T>(a.sources.probabilities.as_deref(), &dataset)?;
    let images = DirectoryImages::new(a.sources.image_root());
    let predictions = predict_dataset(&model, &dataset, &images, table.as_ref())?;
    predictions.save(&a.out)?;
    println!("{} predictions written", predictions.rows.len());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let predictions = PredictionSet::load(&a.predictions)?;
    let (report, cm) = predictions.evaluate()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_atomic(&a.out.join("metrics.csv"), report.to_csv().as_bytes())?;
    write_atomic(&a.out.join("confusion.csv"), cm.to_csv().as_bytes())?;
    write_atomic(
        &a.out.join("confusion_counts.csv"),
        cm.counts_csv().as_bytes(),
    )?;
    println!(
        "total accuracy {:.2}%, average class accuracy {:.2}%",
        report.total_accuracy, report.avg_class_accuracy
    );
    Ok(())
}

fn curve(a: CurveArgs) -> anyhow::Result<()> {
    let cfg = experiment_config(
        a.config.as_deref(),
        &a.overrides,
        a.dataset.as_deref(),
        a.seed,
        &a.out,
    )?;
    match cfg.precision {
        Precision::F32 => curve_typed::<f32>(&cfg, a.weeks.as_deref()),
        Precision::F64 => curve_typed::<f64>(&cfg, a.weeks.as_deref()),
    }
}

fn curve_typed<T: Scalar>(cfg: &ExperimentConfig, weeks: Option<&str>) -> anyhow::Result<()> {
    let dataset = load_manifest(&cfg.dataset)?;
    let weeks: Vec<u32> = match weeks {
        Some(w) => w
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| usage(format!("bad week count `{v}`")))
            })
            .collect::<anyhow::Result<_>>()?,
        None => fortnight_prefixes(&dataset),
    };
    let split = match &cfg.split {
        Some(path) => SplitAssignment::load(path)?,
        None => stratified_split_with(
            &dataset,
            cfg.ratios,
            cfg.seed.expect("resolved"),
            SplitOptions {
                skip_empty_classes: true,
                ..Default::default()
            },
        )?,
    };
    let table = load_table::<T>(cfg.probabilities.as_deref(), &dataset)?;
    let images = DirectoryImages::new(cfg.image_root());
    let records: Vec<&ImageRecord> = dataset.labeled().into_iter().map(|r| r.0).collect();
    let inputs = inputs_for(&cfg.pipeline, &records, &images, table.as_ref())?;
    let curve = learning_curve(&dataset, &inputs, &split, &cfg.pipeline, &weeks)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_atomic(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())?;
    write_atomic(&cfg.out.join("split.tsv"), split.to_text().as_bytes())?;
    write_atomic(&cfg.out.join("curve.csv"), curve.to_csv().as_bytes())?;
    for p in &curve.points {
        println!(
            "{:>2} weeks: {:>6} training records, total accuracy {:.2}%",
            p.weeks, p.train_size, p.report.total_accuracy
        );
    }
    Ok(())
}

fn finetune<T: Scalar>(a: &FinetuneArgs) -> anyhow::Result<()> {
    let base = load_model::<T>(&a.model)?;
    let dataset = load_manifest(&a.sources.dataset)?;
    let dates = dataset.dates();
    if dates.len() < 2 {
        return Err(usage(format!(
            "fine-tuning needs two days of data, found {}",
            dates.len()
        )));
    }
    let day1 = dataset.filtered(|r| r.timestamp.date() == dates[0]);
    let day2 = dataset.filtered(|r| r.timestamp.date() == dates[1]);
    let mut spec = base.spec().clone();
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value, got `{o}`")))?;
        if !spec.set(k.trim(), v.trim())? {
            bail!(usage(format!("unknown setting `{k}`")));
        }
    }
    let mut sgd = spec.sgd.clone();
    sgd.seed = spec.with_seed(a.seed).sgd.seed;
    let table = load_table::<T>(a.sources.probabilities.as_deref(), &dataset)?;
    let images = DirectoryImages::new(a.sources.image_root());
    let records: Vec<&ImageRecord> = dataset.labeled().into_iter().map(|r| r.0).collect();
    let inputs = inputs_for(base.spec(), &records, &images, table.as_ref())?;
    let outcome = finetune_experiment(&base, &day1, &inputs, &day2, &inputs, &sgd)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_atomic(
        &a.out.join("before.csv"),
        outcome.before.to_csv().as_bytes(),
    )?;
    write_atomic(&a.out.join("after.csv"), outcome.after.to_csv().as_bytes())?;
    println!(
        "day 2 total accuracy: {:.2}% before, {:.2}% after fine-tuning on {}",
        outcome.before.total_accuracy, outcome.after.total_accuracy, dates[0]
    );
    Ok(())
}

fn timeline<T: Scalar>(a: &TimelineArgs) -> anyhow::Result<()> {
    let model = load_model::<T>(&a.model)?;
    let dataset = load_manifest(&a.sources.dataset)?.with_label_set(model.label_set().clone())?;
    let day = dataset.filtered(|r| r.timestamp.date() == a.date);
    let records = live_records(&day);
    if records.is_empty() {
        return Err(usage(format!("no images on {}", a.date)));
    }
    let table = load_table::<T>(a.sources.probabilities.as_deref(), &dataset)?;
    let images = DirectoryImages::new(a.sources.image_root());
    let inputs = inputs_for(model.spec(), &records, &images, table.as_ref())?;
    let probs = model.predict_all(&inputs.iter().collect::<Vec<_>>())?;
    let probs: Vec<Vec<f64>> = probs
        .into_iter()
        .map(|p| p.into_iter().map(Scalar::as_f64).collect())
        .collect();
    let timeline = build_timeline(&records, &probs, model.label_set())?;
    timeline.write(&a.out)?;
    println!(
        "{} images in {} segments",
        timeline.entries.len(),
        timeline.segments.len()
    );
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let session = egoact_annotate::AnnotationSession::open(&a.dataset)?;
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    println!("serving {} on http://{}", a.dataset.display(), a.addr);
    runtime
        .block_on(egoact_annotate::serve(session, a.addr))
        .with_context(|| format!("serving on {}", a.addr))
}
