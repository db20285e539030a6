use image::RgbImage;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 10;

/// Per-channel marginal color histogram, channel-major (R bins, G bins, B
/// bins), each channel block normalized by the pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram<T> {
    bins_per_channel: usize,
    values: Vec<T>,
}

impl<T: Scalar> ColorHistogram<T> {
    pub fn from_values(bins_per_channel: usize, values: Vec<T>) -> Result<Self> {
        if bins_per_channel == 0 || values.len() != 3 * bins_per_channel {
            return Err(Error::Dimension {
                expected: 3 * bins_per_channel,
                found: values.len(),
            });
        }
        Ok(Self {
            bins_per_channel,
            values,
        })
    }

    pub fn bins_per_channel(&self) -> usize {
        self.bins_per_channel
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.values[c * self.bins_per_channel..(c + 1) * self.bins_per_channel]
    }
}

/// Bin for an 8-bit value: `min(floor(v * bins / 256), bins - 1)`.
fn bin_of(v: u8, bins: usize) -> usize {
    (v as usize * bins / 256).min(bins - 1)
}

pub fn color_histogram<T: Scalar>(
    image: &RgbImage,
    bins_per_channel: usize,
) -> Result<ColorHistogram<T>> {
    if bins_per_channel == 0 {
        return Err(Error::Config("bins_per_channel must be at least 1".into()));
    }
    let pixels = image.width() as usize * image.height() as usize;
    if pixels == 0 {
        return Err(Error::EmptyInput(
            "cannot build a histogram of an empty image".into(),
        ));
    }
    // Integer counts keep the result independent of pixel order.
    let mut counts = vec![0u64; 3 * bins_per_channel];
    for px in image.pixels() {
        for (c, &v) in px.0.iter().enumerate() {
            counts[c * bins_per_channel + bin_of(v, bins_per_channel)] += 1;
        }
    }
    let n = T::of(pixels as f64);
    ColorHistogram::from_values(
        bins_per_channel,
        counts.into_iter().map(|c| T::of(c as f64) / n).collect(),
    )
}
