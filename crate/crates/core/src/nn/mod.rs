//! Trainable classifiers: a dense network with dropout for numerical and text
//! features, and a fixed convolutional network for images.

mod checkpoint;
mod hyperparams;
mod layers;
mod loss;
mod model;
mod network;
mod real;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use hyperparams::{
    GridPoint, Hyperparams, NetworkSpec, BATCH_SIZE, LEARNING_RATE, MAX_EPOCHS, MIN_DELTA, PATIENCE,
};
pub use layers::{Cache, Conv2d, Dense, Dropout, Layer, MaxPool, ParamGrad};
pub use loss::{
    softmax, softmax_cross_entropy_grad, softmax_rows, weighted_cross_entropy, LOG_EPSILON,
};
pub use model::{PredictionMatrix, StoppingMonitor, TrainedModel, TrainingMetadata};
pub use network::{min_conv_input, Architecture, Network};
pub use real::Real;
pub use train::{fit, fit_conv, fit_dense, VALIDATION_FRACTION};
