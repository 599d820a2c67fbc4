//! Stacked LSTM regression network written from scratch: forward pass,
//! backpropagation through time, Adam training and model files.

mod adam;
mod cell;
mod matrix;
mod model;
mod network;
mod rng;
mod train;

use thiserror::Error;

pub use adam::Adam;
pub use cell::{cell_forward, init_weights, CellVariant, GateParams, LstmLayerParams, LstmState, StepCache};
pub use matrix::Matrix;
pub use model::{load_model, model_from_json, model_to_json, save_model, LstmModel, Mode, FORMAT_VERSION};
pub use network::{DenseHead, ForwardCache, Gradients, LstmNetwork};
pub use rng::SplitMix64;
pub use train::{dataset_mse, train, TrainConfig, TrainHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in input window")]
    NonFiniteInput,
    #[error("network produced a non-finite prediction")]
    NonFiniteOutput,
    #[error("cache does not match network: {0}")]
    CacheMismatch(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("validation fraction {fraction} of {samples} samples leaves no validation or no training samples")]
    EmptyValidation { samples: usize, fraction: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported model format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt model at `{path}`: {message}")]
    CorruptModel { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}
