//! End-to-end pipelines: per-record inputs, fitted pipeline models,
//! experiment configuration and the run driver.

mod inputs;
mod model;
mod predictions;
mod run;
mod spec;

pub use inputs::{prepare_inputs, InputNeeds, RecordInputs};
pub use model::{fit_pipeline, Pipeline, PixelModel, TabularStage};
pub use predictions::{Prediction, PredictionSet};
pub use run::{
    input_needs, inputs_for, predict_dataset, run_experiment, train_and_evaluate, ExperimentConfig,
    ExperimentOutcome, Precision, RunManifest,
};
pub use spec::{ClassifierKind, PipelineSpec};
