use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::inputs::RecordInputs;
use super::spec::{ClassifierKind, PipelineSpec};
use crate::dataset::ActivityLabelSet;
use crate::error::{Error, Result};
use crate::features::{assemble_row, assemble_rows, BlockInputs, Blocks};
use crate::fusion::{classic_combine, late_fusion_fit, LateFusionModel};
use crate::pixel::{continue_training, train_softmax, SgdConfig, SoftmaxModel};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tabular::{argmax, forest_fit, knn_fit, KnnModel, RandomForest};

const HEADER: &str = "egoact-pipeline 1";
const SECTION: &str = "=== ";

/// Source of the per-record class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum PixelModel<T> {
    Softmax(SoftmaxModel<T>),
    /// Probabilities supplied with each record.
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TabularStage<T> {
    None,
    Knn(KnnModel<T>),
    Forest(RandomForest<T>),
    Fusion(LateFusionModel<T>),
}

/// A fitted pipeline: optional pixel-probability source plus tabular stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<T> {
    spec: PipelineSpec,
    label_set: ActivityLabelSet,
    pixel: Option<PixelModel<T>>,
    tabular: TabularStage<T>,
}

fn check_labels(n_inputs: usize, labels: &[usize], k: usize) -> Result<()> {
    if n_inputs == 0 {
        return Err(Error::EmptyInput("no training records".into()));
    }
    if n_inputs != labels.len() {
        return Err(Error::Dimension {
            expected: n_inputs,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Config(format!(
            "label index {bad} outside {k} classes"
        )));
    }
    Ok(())
}

fn pixels_of<'a, T>(inputs: &[&'a RecordInputs<T>]) -> Result<Vec<&'a [T]>> {
    inputs
        .iter()
        .map(|i| {
            i.pixels.as_deref().ok_or_else(|| Error::Coverage {
                block: "pixels".into(),
                ids: vec![i.id.clone()],
            })
        })
        .collect()
}

impl<T: Scalar> PixelModel<T> {
    fn probabilities(&self, input: &RecordInputs<T>) -> Result<Vec<T>> {
        match self {
            PixelModel::Softmax(model) => {
                let pixels = input.pixels.as_deref().ok_or_else(|| Error::Coverage {
                    block: "pixels".into(),
                    ids: vec![input.id.clone()],
                })?;
                model.predict_proba(pixels)
            }
            PixelModel::Table => input.probabilities.clone().ok_or_else(|| Error::Coverage {
                block: "probabilities".into(),
                ids: vec![input.id.clone()],
            }),
        }
    }
}

/// Pixel-model probabilities for every input, in order.
fn all_probabilities<T: Scalar>(
    pixel: &PixelModel<T>,
    inputs: &[&RecordInputs<T>],
) -> Result<Vec<Vec<T>>> {
    inputs.par_iter().map(|i| pixel.probabilities(i)).collect()
}

/// Out-of-fold probabilities: each fold is predicted by a softmax model
/// trained on the other folds.
fn stacked_probabilities<T: Scalar>(
    spec: &PipelineSpec,
    k: usize,
    inputs: &[&RecordInputs<T>],
    labels: &[usize],
    folds: usize,
) -> Result<Vec<Vec<T>>> {
    let pixels = pixels_of(inputs)?;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut stream_rng(spec.sgd.seed, u64::MAX));
    let mut fold_of = vec![0usize; inputs.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut out: Vec<Vec<T>> = vec![Vec::new(); inputs.len()];
    for f in 0..folds {
        let (train_x, train_y): (Vec<&[T]>, Vec<usize>) = (0..inputs.len())
            .filter(|&i| fold_of[i] != f)
            .map(|i| (pixels[i], labels[i]))
            .unzip();
        if train_x.is_empty() {
            return Err(Error::Config(format!(
                "{folds} folds leave a fold without training records"
            )));
        }
        let (model, _) = train_softmax(&train_x, &train_y, k, spec.side, &spec.sgd)?;
        for i in (0..inputs.len()).filter(|&i| fold_of[i] == f) {
            out[i] = model.predict_proba(pixels[i])?;
        }
    }
    Ok(out)
}

/// Fits the tabular stage on top of an already fitted pixel source.
fn fit_tabular<T: Scalar>(
    spec: &PipelineSpec,
    label_set: &ActivityLabelSet,
    inputs: &[&RecordInputs<T>],
    labels: &[usize],
    probabilities: Option<&[Vec<T>]>,
) -> Result<TabularStage<T>> {
    let k = label_set.len();
    let blocks = spec.tabular_blocks();
    let block_inputs: Vec<BlockInputs<'_, T>> = inputs
        .iter()
        .enumerate()
        .map(|(i, r)| r.blocks(probabilities.map(|p| p[i].as_slice())))
        .collect();
    Ok(match spec.classifier {
        ClassifierKind::Softmax => TabularStage::None,
        ClassifierKind::Knn => {
            let (rows, _) = assemble_rows(&block_inputs, blocks)?;
            TabularStage::Knn(knn_fit(&rows, labels, k, spec.k.min(rows.len()))?)
        }
        ClassifierKind::Rdf | ClassifierKind::ClassicEnsemble => {
            let (rows, _) = assemble_rows(&block_inputs, blocks)?;
            TabularStage::Forest(forest_fit(&rows, labels, k, &spec.forest)?)
        }
        ClassifierKind::LateFusion => TabularStage::Fusion(late_fusion_fit(
            &block_inputs,
            labels,
            label_set,
            blocks,
            &spec.forest,
        )?),
    })
}

/// Trains the configured pipeline on `inputs` with class indices `labels`
/// into `label_set`.
pub fn fit_pipeline<T: Scalar>(
    spec: &PipelineSpec,
    label_set: &ActivityLabelSet,
    inputs: &[&RecordInputs<T>],
    labels: &[usize],
) -> Result<Pipeline<T>> {
    spec.validate()?;
    let k = label_set.len();
    check_labels(inputs.len(), labels, k)?;
    let pixel = if !spec.classifier.uses_pixels() {
        None
    } else if spec.external_probabilities {
        Some(PixelModel::Table)
    } else {
        let pixels = pixels_of(inputs)?;
        let (model, _) = train_softmax(&pixels, labels, k, spec.side, &spec.sgd)?;
        Some(PixelModel::Softmax(model))
    };
    let probabilities = match (&pixel, spec.classifier) {
        (Some(PixelModel::Softmax(_)), ClassifierKind::LateFusion)
            if spec.stacked_folds.is_some() =>
        {
            Some(stacked_probabilities(
                spec,
                k,
                inputs,
                labels,
                spec.stacked_folds.expect("checked"),
            )?)
        }
        (Some(p), ClassifierKind::LateFusion) => Some(all_probabilities(p, inputs)?),
        _ => None,
    };
    let tabular = fit_tabular(spec, label_set, inputs, labels, probabilities.as_deref())?;
    Ok(Pipeline {
        spec: spec.clone(),
        label_set: label_set.clone(),
        pixel,
        tabular,
    })
}

impl<T: Scalar> Pipeline<T> {
    pub fn spec(&self) -> &PipelineSpec {
        &self.spec
    }

    pub fn label_set(&self) -> &ActivityLabelSet {
        &self.label_set
    }

    pub fn pixel(&self) -> Option<&PixelModel<T>> {
        self.pixel.as_ref()
    }

    pub fn tabular(&self) -> &TabularStage<T> {
        &self.tabular
    }

    pub fn predict_proba(&self, input: &RecordInputs<T>) -> Result<Vec<T>> {
        let probs = self
            .pixel
            .as_ref()
            .map(|p| p.probabilities(input))
            .transpose()?;
        let blocks = self.spec.tabular_blocks();
        let tab_row = |b: Blocks| assemble_row(&input.blocks(None), b).map(|(row, _)| row);
        match (&self.tabular, self.spec.classifier) {
            (TabularStage::None, _) => {
                probs.ok_or_else(|| Error::Config("pipeline has no pixel model".into()))
            }
            (TabularStage::Knn(m), _) => m.predict_proba(&tab_row(blocks)?),
            (TabularStage::Forest(f), ClassifierKind::ClassicEnsemble) => {
                let p = probs.ok_or_else(|| {
                    Error::Config("classic ensemble lacks its pixel model".into())
                })?;
                classic_combine(&p, &f.predict_proba(&tab_row(blocks)?)?)
            }
            (TabularStage::Forest(f), _) => f.predict_proba(&tab_row(blocks)?),
            (TabularStage::Fusion(m), _) => m.predict_proba(&input.blocks(probs.as_deref())),
        }
    }

    /// Probability vectors for every input, computed in parallel, in order.
    pub fn predict_all(&self, inputs: &[&RecordInputs<T>]) -> Result<Vec<Vec<T>>> {
        inputs.par_iter().map(|i| self.predict_proba(i)).collect()
    }

    /// Class indices (first maximum wins).
    pub fn predict_classes(&self, inputs: &[&RecordInputs<T>]) -> Result<Vec<usize>> {
        Ok(self
            .predict_all(inputs)?
            .iter()
            .map(|p| argmax(p))
            .collect())
    }

    /// Adapts the pipeline to a new user. `label_set` must start with this
    /// pipeline's labels; extra labels get fresh zero rows in the softmax
    /// model. The softmax model continues SGD from its weights with the rows
    /// of classes absent from `labels` frozen; the tabular stage is refit on
    /// `inputs` alone.
    pub fn finetune(
        &self,
        label_set: &ActivityLabelSet,
        inputs: &[&RecordInputs<T>],
        labels: &[usize],
        sgd: &SgdConfig,
    ) -> Result<Pipeline<T>> {
        let old = self.label_set.len();
        if label_set.len() < old || label_set.names()[..old] != *self.label_set.names() {
            return Err(Error::LabelSet(
                "fine-tuning labels must extend the model's label set".into(),
            ));
        }
        let k = label_set.len();
        check_labels(inputs.len(), labels, k)?;
        let pixel = match &self.pixel {
            None => None,
            Some(PixelModel::Table) if k > old => {
                return Err(Error::Config(
                    "externally supplied probabilities cannot grow new classes".into(),
                ))
            }
            Some(PixelModel::Table) => Some(PixelModel::Table),
            Some(PixelModel::Softmax(model)) => {
                let mut model = model.with_extra_classes(k - old);
                let mut present = vec![false; k];
                for &l in labels {
                    present[l] = true;
                }
                continue_training(&mut model, &pixels_of(inputs)?, labels, sgd, Some(&present))?;
                Some(PixelModel::Softmax(model))
            }
        };
        let mut spec = self.spec.clone();
        spec.sgd = sgd.clone();
        let probabilities = match (&pixel, spec.classifier) {
            (Some(p), ClassifierKind::LateFusion) => Some(all_probabilities(p, inputs)?),
            _ => None,
        };
        let tabular = fit_tabular(&spec, label_set, inputs, labels, probabilities.as_deref())?;
        Ok(Pipeline {
            spec,
            label_set: label_set.clone(),
            pixel,
            tabular,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{HEADER}\nprecision {}\nlabels {}\n",
            T::NAME,
            self.label_set.names().join(",")
        );
        for (k, v) in self.spec.pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        match &self.pixel {
            Some(PixelModel::Softmax(m)) => {
                out.push_str(&format!("{SECTION}softmax\n{}", m.to_text()))
            }
            Some(PixelModel::Table) => out.push_str(&format!("{SECTION}table\n")),
            None => {}
        }
        match &self.tabular {
            TabularStage::None => {}
            TabularStage::Knn(m) => out.push_str(&format!("{SECTION}knn\n{}", m.to_text())),
            TabularStage::Forest(m) => out.push_str(&format!("{SECTION}forest\n{}", m.to_text())),
            TabularStage::Fusion(m) => out.push_str(&format!("{SECTION}fusion\n{}", m.to_text())),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("pipeline file: {m}"));
        let sep = format!("\n{SECTION}");
        let mut parts = text.split(sep.as_str());
        let head = parts.next().unwrap_or_default();
        let mut lines = head.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("unsupported header".into()));
        }
        let precision = lines
            .next()
            .and_then(|l| l.strip_prefix("precision "))
            .unwrap_or_default();
        if precision != T::NAME {
            return Err(bad(format!(
                "model stores {precision} values, expected {}",
                T::NAME
            )));
        }
        let labels = lines
            .next()
            .and_then(|l| l.strip_prefix("labels "))
            .ok_or_else(|| bad("missing labels".into()))?;
        let label_set = ActivityLabelSet::new(labels.split(','))?;
        let mut spec = PipelineSpec::default();
        for line in lines.filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("bad setting `{line}`")))?;
            if !spec.set(k, v)? {
                return Err(bad(format!("unknown setting `{k}`")));
            }
        }
        let mut pixel = None;
        let mut tabular = TabularStage::None;
        for part in parts {
            let (name, body) = part.split_once('\n').unwrap_or((part, ""));
            match name {
                "softmax" => pixel = Some(PixelModel::Softmax(SoftmaxModel::from_text(body)?)),
                "table" => pixel = Some(PixelModel::Table),
                "knn" => tabular = TabularStage::Knn(KnnModel::from_text(body)?),
                "forest" => tabular = TabularStage::Forest(RandomForest::from_text(body)?),
                "fusion" => tabular = TabularStage::Fusion(LateFusionModel::from_text(body)?),
                other => return Err(bad(format!("unknown section `{other}`"))),
            }
        }
        let expects_tabular = spec.classifier != ClassifierKind::Softmax;
        if spec.classifier.uses_pixels() != pixel.is_some()
            || expects_tabular == matches!(tabular, TabularStage::None)
        {
            return Err(bad(format!(
                "sections do not match classifier `{}`",
                spec.classifier
            )));
        }
        Ok(Self {
            spec,
            label_set,
            pixel,
            tabular,
        })
    }
}
