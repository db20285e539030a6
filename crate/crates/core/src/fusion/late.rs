use crate::dataset::ActivityLabelSet;
use crate::error::{Error, Result};
use crate::features::{
    assemble_row, assemble_rows, fit_minmax_scaler, BlockInputs, Blocks, FeatureLayout,
    FeatureScaler,
};
use crate::scalar::Scalar;
use crate::tabular::{forest_fit, ForestConfig, RandomForest};

const HEADER: &str = "egoact-late-fusion 1";

/// Forest over scaled `[probabilities | metadata | histogram]` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LateFusionModel<T> {
    forest: RandomForest<T>,
    layout: FeatureLayout,
    label_set: ActivityLabelSet,
    scaler: FeatureScaler<T>,
    blocks: Blocks,
}

pub fn late_fusion_fit<T: Scalar>(
    inputs: &[BlockInputs<'_, T>],
    labels: &[usize],
    label_set: &ActivityLabelSet,
    blocks: Blocks,
    config: &ForestConfig,
) -> Result<LateFusionModel<T>> {
    let (rows, layout) = assemble_rows(inputs, blocks)?;
    if let Some(p) = layout.block(crate::features::BlockKind::Probabilities) {
        if p.len != label_set.len() {
            return Err(Error::Layout(format!(
                "probability block has {} entries for {} classes",
                p.len,
                label_set.len()
            )));
        }
    }
    let scaler = fit_minmax_scaler(&rows)?;
    let scaled = scaler.apply_all(&rows)?;
    let forest = forest_fit(&scaled, labels, label_set.len(), config)?;
    Ok(LateFusionModel {
        forest,
        layout,
        label_set: label_set.clone(),
        scaler,
        blocks,
    })
}

impl<T: Scalar> LateFusionModel<T> {
    pub fn forest(&self) -> &RandomForest<T> {
        &self.forest
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn label_set(&self) -> &ActivityLabelSet {
        &self.label_set
    }

    pub fn blocks(&self) -> Blocks {
        self.blocks
    }

    pub fn predict_proba(&self, input: &BlockInputs<'_, T>) -> Result<Vec<T>> {
        let (row, layout) = assemble_row(input, self.blocks)?;
        if layout != self.layout {
            return Err(Error::Layout(format!(
                "model expects {}, got {}",
                self.layout.to_text(),
                layout.to_text()
            )));
        }
        self.forest.predict_proba(&self.scaler.apply(&row)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "{HEADER}\nlabels {}\nblocks {}\nlayout {}\n{}{}",
            self.label_set.names().join(","),
            self.blocks,
            self.layout.to_text(),
            self.scaler.to_text(),
            self.forest.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("late-fusion model: {m}"));
        let mut lines = text.splitn(7, '\n');
        if lines.next() != Some(HEADER) {
            return Err(bad("unsupported header"));
        }
        let mut field = |name: &str| {
            lines
                .next()
                .and_then(|l| l.strip_prefix(name))
                .ok_or_else(|| bad(&format!("missing `{}`", name.trim())))
        };
        let label_set = ActivityLabelSet::new(field("labels ")?.split(','))?;
        let blocks: Blocks = field("blocks ")?.parse()?;
        let layout = FeatureLayout::from_text(field("layout ")?)?;
        let scaler_text = format!("{}\n{}\n", field("")?, field("")?);
        let scaler = FeatureScaler::from_text(&scaler_text)?;
        let forest = RandomForest::from_text(field("")?)?;
        if forest.n_features() != layout.total_len() || scaler.dim() != layout.total_len() {
            return Err(bad("forest, scaler and layout disagree in width"));
        }
        if forest.n_classes() != label_set.len()
            || blocks.kinds() != layout.blocks().iter().map(|b| b.kind).collect::<Vec<_>>()
        {
            return Err(bad("label set or blocks disagree with the forest"));
        }
        Ok(Self {
            forest,
            layout,
            label_set,
            scaler,
            blocks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColorHistogram, MetadataFeatures};

    fn meta(hour: u8) -> MetadataFeatures {
        MetadataFeatures {
            day_of_week: 0,
            hour,
            minute: 0,
        }
    }

    #[test]
    fn metadata_decides_when_probabilities_are_noise() {
        let set = ActivityLabelSet::new(["A", "B"]).unwrap();
        let ids: Vec<String> = (0..40).map(|i| format!("r{i}")).collect();
        let probs: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                if i % 3 == 0 {
                    vec![0.9, 0.1]
                } else {
                    vec![0.2, 0.8]
                }
            })
            .collect();
        let hours: Vec<u8> = (0..40).map(|i| (i % 24) as u8).collect();
        let labels: Vec<usize> = hours.iter().map(|&h| usize::from(h >= 12)).collect();
        let inputs: Vec<BlockInputs<'_, f64>> = ids
            .iter()
            .zip(&probs)
            .zip(&hours)
            .map(|((id, p), &h)| BlockInputs {
                id,
                probabilities: Some(p),
                metadata: Some(meta(h)),
                histogram: None,
            })
            .collect();
        let blocks = Blocks {
            probabilities: true,
            metadata: true,
            histogram: false,
        };
        let cfg = ForestConfig {
            n_trees: 25,
            seed: 3,
            ..Default::default()
        };
        let model = late_fusion_fit(&inputs, &labels, &set, blocks, &cfg).unwrap();
        assert_eq!(model.layout().total_len(), 5);
        for (input, &label) in inputs.iter().zip(&labels) {
            let p = model.predict_proba(input).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p[label] > 0.5);
        }
        let again = late_fusion_fit(&inputs, &labels, &set, blocks, &cfg).unwrap();
        assert_eq!(again, model);
        assert_eq!(LateFusionModel::from_text(&model.to_text()).unwrap(), model);
    }

    #[test]
    fn full_layout_is_52_wide() {
        let set = ActivityLabelSet::daily_activities();
        let p = [1.0 / 19.0; 19];
        let h = ColorHistogram::from_values(10, vec![0.1; 30]).unwrap();
        let inputs = [
            BlockInputs {
                id: "x",
                probabilities: Some(&p[..]),
                metadata: Some(meta(8)),
                histogram: Some(&h),
            },
            BlockInputs {
                id: "y",
                probabilities: Some(&p[..]),
                metadata: Some(meta(9)),
                histogram: Some(&h),
            },
        ];
        let cfg = ForestConfig {
            n_trees: 2,
            ..Default::default()
        };
        let model = late_fusion_fit(&inputs, &[0, 1], &set, Blocks::ALL, &cfg).unwrap();
        assert_eq!(model.layout().total_len(), 52);
        assert_eq!(model.forest().n_features(), 52);
        let partial = BlockInputs {
            histogram: None,
            ..inputs[0]
        };
        assert!(model.predict_proba(&partial).is_err());
        let short = [0.5, 0.5];
        let wrong = BlockInputs {
            probabilities: Some(&short[..]),
            ..inputs[0]
        };
        assert!(matches!(model.predict_proba(&wrong), Err(Error::Layout(_))));
    }
}
