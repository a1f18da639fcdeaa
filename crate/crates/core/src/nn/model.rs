use ndarray::{concatenate, Array2, ArrayD, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::softmax;
use super::network::{Architecture, Network};
use crate::error::{Error, Result};

/// Rows per inference chunk. Fixed so results do not depend on thread count.
const PREDICT_CHUNK: usize = 256;

/// What early stopping monitored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMonitor {
    ValidationAccuracy,
    /// No stratified hold-out was possible; training accuracy was used.
    TrainingAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Monitored accuracy at `best_epoch`.
    pub best_accuracy: f64,
    pub monitor: StoppingMonitor,
    pub class_weights: Vec<f64>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Class-probability matrix, one distribution per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    probabilities: Array2<f64>,
}

impl PredictionMatrix {
    pub fn new(probabilities: Array2<f64>) -> Self {
        PredictionMatrix { probabilities }
    }

    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probabilities
    }

    pub fn predicted_classes(&self) -> Vec<usize> {
        self.probabilities
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |b, (i, &p)| if p > b.1 { (i, p) } else { b },
                    )
                    .0
            })
            .collect()
    }
}

/// A trained classifier: immutable after fitting, safe to share for
/// concurrent inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub(crate) architecture: Architecture,
    pub(crate) network: Network<f32>,
    pub(crate) metadata: TrainingMetadata,
}

impl TrainedModel {
    pub fn new(
        architecture: Architecture,
        network: Network<f32>,
        metadata: TrainingMetadata,
    ) -> Self {
        TrainedModel {
            architecture,
            network,
            metadata,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn network(&self) -> &Network<f32> {
        &self.network
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    /// Class probabilities for every row of `features`.
    pub fn predict_proba(&self, features: &ArrayD<f32>) -> Result<PredictionMatrix> {
        let expected = self.architecture.input_shape();
        if features.ndim() < 1 || features.shape()[1..] != expected[..] {
            return Err(Error::Shape {
                expected: format!("(N, {})", join(&expected)),
                actual: format!("({})", join(features.shape())),
            });
        }
        let n = features.shape()[0];
        let starts: Vec<usize> = (0..n).step_by(PREDICT_CHUNK).collect();
        let parts: Vec<Array2<f64>> = starts
            .par_iter()
            .map(|&s| {
                let end = (s + PREDICT_CHUNK).min(n);
                let x = features.slice_axis(Axis(0), (s..end).into()).to_owned();
                let logits = self.network.infer(x).mapv(f64::from);
                let mut out = Array2::zeros(logits.dim());
                for (mut o, z) in out.outer_iter_mut().zip(logits.outer_iter()) {
                    o.assign(&softmax(z));
                }
                out
            })
            .collect();
        let probabilities = if parts.is_empty() {
            Array2::zeros((0, self.architecture.classes()))
        } else {
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            concatenate(Axis(0), &views).expect("chunks share the class dimension")
        };
        Ok(PredictionMatrix { probabilities })
    }
}

fn join(dims: &[usize]) -> String {
    dims.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
