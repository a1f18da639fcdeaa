//! Mini-batch SGD with class-weighted cross-entropy and early stopping on
//! the accuracy of an internal stratified hold-out.

use ndarray::{ArrayD, Axis};
use rand::seq::SliceRandom;

use super::hyperparams::{Hyperparams, NetworkSpec};
use super::loss::{softmax_cross_entropy_grad, softmax_rows, weighted_cross_entropy};
use super::model::{StoppingMonitor, TrainedModel, TrainingMetadata};
use super::network::{Architecture, Network};
use crate::data::{class_weights_lenient, Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Fraction of the training data held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;

const EVAL_CHUNK: usize = 512;

/// Trains the dense feed-forward network described by `hp.network`.
pub fn fit_dense(dataset: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    let point = match hp.network {
        NetworkSpec::Dense(p) => p,
        NetworkSpec::Conv => {
            return Err(Error::config(
                "fit_dense needs a dense network specification",
            ))
        }
    };
    if dataset.kind() == DatasetKind::Image {
        return Err(Error::config(
            "image datasets are trained with the convolutional network",
        ));
    }
    hp.validate()?;
    let arch = Architecture::dense(dataset.instance_shape()[0], point, dataset.num_classes());
    fit_architecture(dataset, arch, hp)
}

/// Trains the fixed convolutional network on an image dataset.
pub fn fit_conv(dataset: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    if hp.network != NetworkSpec::Conv {
        return Err(Error::config(
            "fit_conv needs the convolutional specification",
        ));
    }
    if dataset.kind() != DatasetKind::Image {
        return Err(Error::config(
            "the convolutional network needs an image dataset",
        ));
    }
    hp.validate()?;
    let s = dataset.instance_shape();
    let arch = Architecture::conv(s[0], s[1], s[2], dataset.num_classes())?;
    fit_architecture(dataset, arch, hp)
}

/// Dispatches on the network specification.
pub fn fit(dataset: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    match hp.network {
        NetworkSpec::Dense(_) => fit_dense(dataset, hp),
        NetworkSpec::Conv => fit_conv(dataset, hp),
    }
}

fn fit_architecture(
    dataset: &Dataset,
    arch: Architecture,
    hp: &Hyperparams,
) -> Result<TrainedModel> {
    let mut init_rng = rng_from_seed(derive_seed(hp.seed, &[stream::INIT]));
    let network: Network<f32> = arch.build(&mut init_rng);
    let (network, metadata) = train(network, dataset, hp)?;
    Ok(TrainedModel::new(arch, network, metadata))
}

/// Splits off roughly `fraction` of every class for validation. Returns
/// `None` when some present class has fewer than two instances.
pub(crate) fn stratified_holdout(
    classes: &[usize],
    num_classes: usize,
    fraction: f64,
    seed: u64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    if by_class.iter().any(|m| m.len() == 1) {
        return None;
    }
    let mut rng = rng_from_seed(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut members in by_class.into_iter().filter(|m| !m.is_empty()) {
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * fraction).round() as usize).clamp(1, members.len() - 1);
        val.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Some((train, val))
}

pub(crate) fn accuracy(network: &Network<f32>, x: &ArrayD<f32>, classes: &[usize]) -> f64 {
    let n = classes.len();
    if n == 0 {
        return 0.0;
    }
    let mut correct = 0usize;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let logits = network.infer(x.slice_axis(Axis(0), (start..end).into()).to_owned());
        for (row, &t) in logits.outer_iter().zip(&classes[start..end]) {
            let pred = row
                .iter()
                .enumerate()
                .fold(
                    (0, f32::NEG_INFINITY),
                    |b, (i, &v)| if v > b.1 { (i, v) } else { b },
                )
                .0;
            correct += usize::from(pred == t);
        }
    }
    correct as f64 / n as f64
}

fn train(
    mut network: Network<f32>,
    dataset: &Dataset,
    hp: &Hyperparams,
) -> Result<(Network<f32>, TrainingMetadata)> {
    let classes = dataset.class_indices();
    let c = dataset.num_classes();
    let split = stratified_holdout(
        &classes,
        c,
        VALIDATION_FRACTION,
        derive_seed(hp.seed, &[stream::SPLIT]),
    );
    let (train_idx, monitor_idx, monitor) = match split {
        Some((t, v)) => (t, v, StoppingMonitor::ValidationAccuracy),
        None => {
            log::warn!(
                "a class has fewer than 2 instances; early stopping falls back to training accuracy"
            );
            let all: Vec<usize> = (0..classes.len()).collect();
            (all.clone(), all, StoppingMonitor::TrainingAccuracy)
        }
    };

    let features = dataset.features();
    let x_train = features.select(Axis(0), &train_idx);
    let y_train: Vec<usize> = train_idx.iter().map(|&i| classes[i]).collect();
    let x_mon = features.select(Axis(0), &monitor_idx);
    let y_mon: Vec<usize> = monitor_idx.iter().map(|&i| classes[i]).collect();

    let weights = class_weights_lenient(dataset.labels().select(Axis(0), &train_idx).view());
    let weights_f32: Vec<f32> = weights.iter().map(|&w| w as f32).collect();

    let mut shuffle_rng = rng_from_seed(derive_seed(hp.seed, &[stream::SHUFFLE]));
    let mut dropout_rng = rng_from_seed(derive_seed(hp.seed, &[stream::DROPOUT]));
    let lr = hp.learning_rate as f32;

    let mut order: Vec<usize> = (0..train_idx.len()).collect();
    let mut best: Option<(f64, usize, Network<f32>)> = None;
    let mut since_improvement = 0usize;
    let mut epoch_losses = Vec::new();

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(hp.batch_size) {
            let xb = x_train.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y_train[i]).collect();
            let (logits, caches) = network.forward_train(xb, &mut dropout_rng);
            let probs = softmax_rows(logits.view());
            let loss = weighted_cross_entropy(probs.view(), &yb, &weights_f32);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss as f64 * batch.len() as f64;
            let dlogits = softmax_cross_entropy_grad(probs.view(), &yb, &weights_f32);
            let grads = network.backward(&caches, dlogits);
            network.sgd_step(&grads, lr);
        }
        epoch_losses.push(loss_sum / order.len().max(1) as f64);

        let acc = accuracy(&network, &x_mon, &y_mon);
        let improved = match &best {
            None => true,
            Some((best_acc, _, _)) => acc - best_acc >= hp.min_delta,
        };
        if improved {
            best = Some((acc, epoch, network.clone()));
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= hp.patience {
                break;
            }
        }
    }

    let epochs_run = epoch_losses.len();
    let (best_accuracy, best_epoch, best_network) = best.expect("at least one epoch ran");
    log::debug!("trained {epochs_run} epochs, best {best_accuracy:.4} at epoch {best_epoch}");
    Ok((
        best_network,
        TrainingMetadata {
            epochs_run,
            best_epoch,
            best_accuracy,
            monitor,
            class_weights: weights,
            epoch_losses,
        },
    ))
}
