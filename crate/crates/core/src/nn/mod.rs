//! One-dimensional CNN: a convolution layer, max pooling, a ReLU hidden
//! layer and a two-way softmax, trained with Adam on cross-entropy.

mod adam;
mod backward;
mod checkpoint;
mod config;
pub mod layers;
mod params;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use backward::{
    accumulate, backward, batch_gradients, example_deltas, mean_batch_gradients, predicted_label,
    ExampleDeltas,
};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use config::{Architecture, ModelConfig, N_CLASSES};
pub use layers::{conv1d_forward, maxpool_forward, mlp_forward, softmax, FeatureMaps, MlpOutput, Pooled};
pub use params::{init_parameters, Gradients, ModelParameters, Real, N_TENSORS};
pub use train::{
    evaluate_rows, predict, train, EpochRecord, EpochTrace, Prediction, TrainedModel, TrainingOutcome,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {layer}{}", if context.is_empty() { String::new() } else { format!(" ({context})") })]
    Numerical { layer: &'static str, context: String },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl NnError {
    /// Tags a numerical error with the epoch and batch it occurred in.
    pub fn at(self, epoch: usize, batch: usize) -> NnError {
        match self {
            NnError::Numerical { layer, context } => NnError::Numerical {
                layer,
                context: if context.is_empty() {
                    format!("epoch {epoch}, batch {batch}")
                } else {
                    format!("{context}; epoch {epoch}, batch {batch}")
                },
            },
            other => other,
        }
    }
}
