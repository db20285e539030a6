//! Per-image class probabilities from raw pixels.

mod image;
mod softmax;
mod source;
mod table;

pub use self::image::{load_rgb, pixel_vector, save_ppm, Downsampler, DECODE_SIDE};
pub use softmax::{
    continue_training, gradient_check, gradient_check_against, softmax, train_softmax, Gradient,
    SgdConfig, SoftmaxModel, TrainReport, DEFAULT_SIDE,
};
pub use source::{DirectoryImages, ImageSource};
pub use table::{load_probability_table, simplex_violation, ProbabilityTable, SIMPLEX_TOLERANCE};
