use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cell of the dense-network search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub depth: usize,
    pub units: usize,
    pub dropout: f64,
}

impl GridPoint {
    /// Trainable parameter count for a network with `input_dim` inputs and
    /// `classes` outputs.
    pub fn parameter_count(&self, input_dim: usize, classes: usize) -> usize {
        let first = (input_dim + 1) * self.units;
        let hidden = (self.depth - 1) * (self.units + 1) * self.units;
        first + hidden + (self.units + 1) * classes
    }
}

/// Which classifier to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "lowercase")]
pub enum NetworkSpec {
    Dense(GridPoint),
    /// The fixed convolutional network for images.
    Conv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(flatten)]
    pub network: NetworkSpec,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

pub const LEARNING_RATE: f64 = 1e-2;
pub const MAX_EPOCHS: usize = 200;
pub const BATCH_SIZE: usize = 32;
pub const PATIENCE: usize = 15;
pub const MIN_DELTA: f64 = 0.005;

impl Hyperparams {
    pub fn new(network: NetworkSpec, seed: u64) -> Self {
        Hyperparams {
            network,
            learning_rate: LEARNING_RATE,
            max_epochs: MAX_EPOCHS,
            batch_size: BATCH_SIZE,
            patience: PATIENCE,
            min_delta: MIN_DELTA,
            seed,
        }
    }

    pub fn dense(point: GridPoint, seed: u64) -> Self {
        Self::new(NetworkSpec::Dense(point), seed)
    }

    pub fn conv(seed: u64) -> Self {
        Self::new(NetworkSpec::Conv, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive and finite"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::config("min_delta must be non-negative"));
        }
        if let NetworkSpec::Dense(p) = self.network {
            if p.depth == 0 || p.units == 0 {
                return Err(Error::config(
                    "dense networks need depth >= 1 and units >= 1",
                ));
            }
            if !(0.0..1.0).contains(&p.dropout) {
                return Err(Error::config("dropout must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}
