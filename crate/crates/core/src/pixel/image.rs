use std::io::Write as _;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, RgbImage};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Side of the square every image is resampled to before downsampling.
pub const DECODE_SIDE: usize = 256;

/// Decodes any supported file to 8-bit RGB; grayscale is replicated.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| Error::Image {
            id: path.display().to_string(),
            message: e.to_string(),
        })
}

/// Writes a binary PPM (`P6`) file.
pub fn save_ppm(image: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let err = |message: String| Error::Image {
        id: path.display().to_string(),
        message,
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(
            image.as_raw(),
            image.width(),
            image.height(),
            ExtendedColorType::Rgb8,
        )
        .map_err(|e| err(e.to_string()))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Sparse area-averaging weights from `src` samples to `dst` samples: output
/// cell `o` covers `[o*src/dst, (o+1)*src/dst)` and weights each input cell
/// by its overlap.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut w = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < src {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((i, overlap / scale));
                }
                i += 1;
            }
            w
        })
        .collect()
}

/// `outer ∘ inner` for sparse weight tables.
fn compose(
    outer: &[Vec<(usize, f64)>],
    inner: &[Vec<(usize, f64)>],
    src: usize,
) -> Vec<Vec<(usize, f64)>> {
    outer
        .iter()
        .map(|row| {
            let mut dense = vec![0.0; src];
            for &(mid, wo) in row {
                for &(s, wi) in &inner[mid] {
                    dense[s] += wo * wi;
                }
            }
            dense
                .into_iter()
                .enumerate()
                .filter(|(_, w)| *w != 0.0)
                .collect()
        })
        .collect()
}

/// Area resampling of an image to `side × side`, first to the fixed
/// 256×256 decode size and then down to `side`. Both stages are linear and
/// separable, so they are folded into one weight table per axis.
#[derive(Debug, Clone)]
pub struct Downsampler {
    src_w: usize,
    src_h: usize,
    side: usize,
    wx: Vec<Vec<(usize, f64)>>,
    wy: Vec<Vec<(usize, f64)>>,
}

impl Downsampler {
    pub fn new(src_w: usize, src_h: usize, side: usize) -> Self {
        let to_side = area_weights(DECODE_SIDE, side);
        Self {
            src_w,
            src_h,
            side,
            wx: compose(&to_side, &area_weights(src_w, DECODE_SIDE), src_w),
            wy: compose(&to_side, &area_weights(src_h, DECODE_SIDE), src_h),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn fits(&self, image: &RgbImage) -> bool {
        image.width() as usize == self.src_w && image.height() as usize == self.src_h
    }

    /// Pixel vector of length `3·side²` in row-major `(y, x, channel)` order,
    /// values scaled to `[0, 1]`.
    pub fn apply<T: Scalar>(&self, image: &RgbImage) -> Vec<T> {
        debug_assert!(self.fits(image));
        let raw = image.as_raw();
        let s = self.side;
        // Horizontal pass: src_h rows × side columns × 3.
        let mut rows = vec![0.0f64; self.src_h * s * 3];
        for y in 0..self.src_h {
            for (ox, weights) in self.wx.iter().enumerate() {
                let mut acc = [0.0f64; 3];
                for &(x, w) in weights {
                    let p = (y * self.src_w + x) * 3;
                    acc[0] += w * raw[p] as f64;
                    acc[1] += w * raw[p + 1] as f64;
                    acc[2] += w * raw[p + 2] as f64;
                }
                rows[(y * s + ox) * 3..(y * s + ox) * 3 + 3].copy_from_slice(&acc);
            }
        }
        let mut out = Vec::with_capacity(s * s * 3);
        for weights in &self.wy {
            for ox in 0..s {
                let mut acc = [0.0f64; 3];
                for &(y, w) in weights {
                    let p = (y * s + ox) * 3;
                    acc[0] += w * rows[p];
                    acc[1] += w * rows[p + 1];
                    acc[2] += w * rows[p + 2];
                }
                out.extend(acc.iter().map(|v| T::of(v / 255.0)));
            }
        }
        out
    }
}

/// One-off helper when images of varying size are processed.
pub fn pixel_vector<T: Scalar>(image: &RgbImage, side: usize) -> Result<Vec<T>> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::EmptyInput("cannot downsample an empty image".into()));
    }
    Ok(Downsampler::new(image.width() as usize, image.height() as usize, side).apply(image))
}
