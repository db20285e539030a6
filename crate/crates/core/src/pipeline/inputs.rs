use rayon::prelude::*;

use crate::dataset::ImageRecord;
use crate::error::{Error, Result};
use crate::features::{
    color_histogram, extract_metadata, BlockInputs, ColorHistogram, MetadataFeatures,
};
use crate::pixel::{Downsampler, ImageSource, ProbabilityTable};
use crate::scalar::Scalar;

/// Everything a pipeline may consume for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordInputs<T> {
    pub id: String,
    pub metadata: MetadataFeatures,
    pub histogram: Option<ColorHistogram<T>>,
    /// Downsampled pixel vector for the built-in softmax model.
    pub pixels: Option<Vec<T>>,
    /// Externally supplied class probabilities.
    pub probabilities: Option<Vec<T>>,
}

impl<T: Scalar> RecordInputs<T> {
    /// Block view with `probabilities` standing in for the probability block.
    pub fn blocks<'a>(&'a self, probabilities: Option<&'a [T]>) -> BlockInputs<'a, T> {
        BlockInputs {
            id: &self.id,
            probabilities,
            metadata: Some(self.metadata),
            histogram: self.histogram.as_ref(),
        }
    }
}

/// What to compute per record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputNeeds {
    pub histogram_bins: Option<usize>,
    pub pixel_side: Option<usize>,
}

impl InputNeeds {
    pub fn needs_images(&self) -> bool {
        self.histogram_bins.is_some() || self.pixel_side.is_some()
    }
}

/// Computes inputs for `records` in order, decoding each image at most once.
/// Images are only read when `needs` asks for histograms or pixels.
pub fn prepare_inputs<T: Scalar>(
    records: &[&ImageRecord],
    images: Option<&dyn ImageSource>,
    needs: InputNeeds,
    table: Option<&ProbabilityTable<T>>,
) -> Result<Vec<RecordInputs<T>>> {
    if needs.needs_images() && images.is_none() {
        return Err(Error::Config(
            "histogram or pixel features need an image source".into(),
        ));
    }
    if let Some(table) = table {
        let missing: Vec<String> = records
            .iter()
            .filter(|r| table.get(&r.id).is_none())
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Coverage {
                block: "probabilities".into(),
                ids: missing,
            });
        }
    }
    records
        .par_iter()
        .map(|record| {
            let mut inputs = RecordInputs {
                id: record.id.clone(),
                metadata: extract_metadata(&record.timestamp),
                histogram: None,
                pixels: None,
                probabilities: table.and_then(|t| t.get(&record.id)).map(<[T]>::to_vec),
            };
            if let (true, Some(source)) = (needs.needs_images(), images) {
                let image = source.load(record)?;
                if image.width() == 0 || image.height() == 0 {
                    return Err(Error::Image {
                        id: record.id.clone(),
                        message: "image is empty".into(),
                    });
                }
                if let Some(bins) = needs.histogram_bins {
                    inputs.histogram = Some(color_histogram(&image, bins)?);
                }
                if let Some(side) = needs.pixel_side {
                    let down =
                        Downsampler::new(image.width() as usize, image.height() as usize, side);
                    inputs.pixels = Some(down.apply(&image));
                }
            }
            Ok(inputs)
        })
        .collect()
}
