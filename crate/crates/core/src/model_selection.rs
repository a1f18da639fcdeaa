//! Automatic classifier configuration: 3-fold cross-validated grid search
//! over dense networks, or the fixed convolutional network for images.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::nn::{fit, Hyperparams, NetworkSpec, LEARNING_RATE, MAX_EPOCHS};
use crate::rng::{derive_seed, rng_from_seed, stream};

pub use crate::nn::GridPoint;

pub const GRID_DEPTHS: [usize; 4] = [1, 2, 3, 5];
pub const GRID_UNITS: [usize; 2] = [50, 120];
pub const GRID_DROPOUTS: [f64; 3] = [0.0, 0.1, 0.2];

/// Candidate networks for a dataset kind, in grid order (depth, then units,
/// then dropout). Images get the single fixed convolutional network.
pub fn hyperparameter_grid(kind: DatasetKind) -> Vec<NetworkSpec> {
    match kind {
        DatasetKind::Image => vec![NetworkSpec::Conv],
        DatasetKind::Numerical | DatasetKind::Text => GRID_DEPTHS
            .iter()
            .flat_map(|&depth| {
                GRID_UNITS.iter().flat_map(move |&units| {
                    GRID_DROPOUTS.iter().map(move |&dropout| {
                        NetworkSpec::Dense(GridPoint {
                            depth,
                            units,
                            dropout,
                        })
                    })
                })
            })
            .collect(),
    }
}

/// Splits `0..N` into `k` disjoint folds whose sizes differ by at most one,
/// keeping class proportions within one instance per fold. Falls back to an
/// unstratified split when some class has fewer than `k` members.
pub fn stratified_kfold(classes: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = classes.len();
    if k == 0 || n < k {
        return Err(Error::config(format!(
            "cannot split {n} instances into {k} folds"
        )));
    }
    let num_classes = classes.iter().max().map_or(0, |&m| m + 1);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = rng_from_seed(seed);
    let stratify = by_class.iter().all(|m| m.is_empty() || m.len() >= k);
    let sequence: Vec<usize> = if stratify {
        by_class
            .into_iter()
            .flat_map(|mut members| {
                members.shuffle(&mut rng);
                members
            })
            .collect()
    } else {
        log::warn!("a class has fewer than {k} instances; using unstratified folds");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    // Dealing the class-grouped sequence round-robin spreads every class
    // evenly and keeps fold sizes within one of each other.
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in sequence.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Macro-averaged F1 over `num_classes` classes; a class whose precision and
/// recall are both zero (or undefined) contributes 0.
pub fn balanced_f_score(truth: &[usize], predicted: &[usize], num_classes: usize) -> f64 {
    assert_eq!(truth.len(), predicted.len());
    assert!(num_classes > 0);
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            // F1 = 2TP / (2TP + FP + FN), which equals 2PR/(P+R) when defined.
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if tp[c] == 0 || denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    total / num_classes as f64
}

/// Cross-validation outcome for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub point_id: usize,
    pub point: GridPoint,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub folds: usize,
    /// Epoch cap for the cross-validation fits.
    pub cv_max_epochs: usize,
    /// Epoch cap for the returned configuration.
    pub max_epochs: usize,
    pub learning_rate: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            folds: 3,
            cv_max_epochs: 50,
            max_epochs: MAX_EPOCHS,
            learning_rate: LEARNING_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub hyperparams: Hyperparams,
    /// One entry per grid point; empty for images.
    pub cv_results: Vec<CvResult>,
    pub training_runs: usize,
}

/// Orders grid points best-first: higher mean score, then fewer parameters
/// (smaller depth, then fewer units, then higher dropout), then grid order.
fn rank(a: &CvResult, b: &CvResult) -> Ordering {
    b.mean_score
        .total_cmp(&a.mean_score)
        .then(a.point.depth.cmp(&b.point.depth))
        .then(a.point.units.cmp(&b.point.units))
        .then(b.point.dropout.total_cmp(&a.point.dropout))
        .then(a.point_id.cmp(&b.point_id))
}

/// Picks the best entry of `results` under the selection order.
pub fn best_cv_result(results: &[CvResult]) -> Option<&CvResult> {
    results.iter().min_by(|a, b| rank(a, b))
}

/// Chooses hyperparameters for a preprocessed dataset.
pub fn select_hyperparameters(
    dataset: &Dataset,
    seed: u64,
    config: &SelectionConfig,
) -> Result<Selection> {
    let grid = hyperparameter_grid(dataset.kind());
    let finalize = |network: NetworkSpec| {
        let mut hp = Hyperparams::new(network, derive_seed(seed, &[stream::FINAL_FIT]));
        hp.max_epochs = config.max_epochs;
        hp.learning_rate = config.learning_rate;
        hp
    };
    if dataset.kind() == DatasetKind::Image {
        return Ok(Selection {
            hyperparams: finalize(NetworkSpec::Conv),
            cv_results: Vec::new(),
            training_runs: 0,
        });
    }

    let classes = dataset.class_indices();
    let folds = stratified_kfold(
        &classes,
        config.folds,
        derive_seed(seed, &[stream::CV_FOLDS]),
    )?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..folds.len()).map(move |f| (p, f)))
        .collect();

    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let held_out = &folds[f];
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            let mut hp = Hyperparams::new(
                grid[p],
                derive_seed(seed, &[stream::CV_FIT, p as u64, f as u64]),
            );
            hp.max_epochs = config.cv_max_epochs;
            hp.learning_rate = config.learning_rate;
            let outcome = fit(&dataset.subset(&train_idx), &hp).and_then(|model| {
                let test = dataset.subset(held_out);
                let pred = model.predict_proba(test.features())?.predicted_classes();
                Ok(balanced_f_score(
                    &test.class_indices(),
                    &pred,
                    dataset.num_classes(),
                ))
            });
            outcome
                .map_err(|e| log::warn!("grid point {p}, fold {f} failed, point scores 0: {e}"))
                .ok()
        })
        .collect();

    let cv_results: Vec<CvResult> = grid
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let point = match spec {
                NetworkSpec::Dense(point) => *point,
                NetworkSpec::Conv => unreachable!("image grids return early"),
            };
            let outcomes = &scores[p * folds.len()..(p + 1) * folds.len()];
            let fold_scores: Vec<f64> = outcomes.iter().map(|s| s.unwrap_or(0.0)).collect();
            let mean_score = if outcomes.iter().any(Option::is_none) {
                0.0
            } else {
                fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
            };
            CvResult {
                point_id: p,
                point,
                fold_scores,
                mean_score,
            }
        })
        .collect();
    let best = best_cv_result(&cv_results).expect("grid is non-empty");
    log::info!(
        "selected depth={} units={} dropout={} (mean balanced F {:.4})",
        best.point.depth,
        best.point.units,
        best.point.dropout,
        best.mean_score
    );
    Ok(Selection {
        hyperparams: finalize(NetworkSpec::Dense(best.point)),
        training_runs: jobs.len(),
        cv_results,
    })
}

/// Writes the CV trace as CSV:
/// `point_id,depth,units,dropout,fold,f_score,mean_f_score`.
pub fn write_cv_trace<W: Write>(results: &[CvResult], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::load(format!("cv trace: {e}"));
    csv.write_record([
        "point_id",
        "depth",
        "units",
        "dropout",
        "fold",
        "f_score",
        "mean_f_score",
    ])
    .map_err(err)?;
    for r in results {
        for (fold, score) in r.fold_scores.iter().enumerate() {
            csv.write_record([
                r.point_id.to_string(),
                r.point.depth.to_string(),
                r.point.units.to_string(),
                r.point.dropout.to_string(),
                fold.to_string(),
                score.to_string(),
                r.mean_score.to_string(),
            ])
            .map_err(err)?;
        }
    }
    csv.flush()
        .map_err(|e| Error::load(format!("cv trace: {e}")))
}
