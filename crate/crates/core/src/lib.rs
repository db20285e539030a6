//! Daily-activity prediction for egocentric photo streams.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod features;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pixel;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Knn = tabular::KnnModel<f64>;
pub type Forest = tabular::RandomForest<f64>;
pub type Softmax = pixel::SoftmaxModel<f64>;
pub type LateFusion = fusion::LateFusionModel<f64>;
pub type FittedPipeline = pipeline::Pipeline<f64>;
pub type Knn32 = tabular::KnnModel<f32>;
pub type Forest32 = tabular::RandomForest<f32>;
pub type Softmax32 = pixel::SoftmaxModel<f32>;
