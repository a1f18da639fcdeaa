//! The detection pipeline: preprocess, select a classifier, train it on the
//! full dataset, re-score every instance by the predicted probability of its
//! own label, and return the lowest-scoring `floor(alpha * N)` instances.

use std::io::Write;
use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::{class_weights, preprocess, Dataset};
use crate::error::{Error, Result};
use crate::model_selection::{select_hyperparameters, CvResult, SelectionConfig};
use crate::nn::{fit, Hyperparams, PredictionMatrix, TrainedModel};
use crate::rng::{derive_seed, floor_count, stream};

/// Above this size full scores are dropped unless explicitly requested.
pub const FULL_SCORES_AUTO_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suspect {
    pub index: usize,
    pub score: f64,
}

/// The review list: suspects in ascending score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspicionRanking {
    pub alpha: f64,
    pub n: usize,
    pub suspects: Vec<Suspect>,
    /// Score of every instance, indexed like the dataset.
    pub full_scores: Option<Vec<f64>>,
    pub hyperparams: Option<Hyperparams>,
    pub runtime_seconds: f64,
}

impl SuspicionRanking {
    pub fn indices(&self) -> Vec<usize> {
        self.suspects.iter().map(|s| s.index).collect()
    }
}

/// `s_n = <y_n, p_n>`: the predicted probability of each instance's label.
pub fn suspicion_scores(labels: ArrayView2<'_, f32>, probs: &PredictionMatrix) -> Result<Vec<f64>> {
    let p = probs.probabilities();
    if labels.dim() != p.dim() {
        return Err(Error::Shape {
            expected: format!("{:?}", labels.dim()),
            actual: format!("{:?}", p.dim()),
        });
    }
    Ok(labels
        .outer_iter()
        .zip(p.outer_iter())
        .map(|(y, q)| y.iter().zip(q).map(|(&a, &b)| a as f64 * b).sum())
        .collect())
}

/// Number of suspects returned for `alpha` over `n` instances.
pub fn review_size(alpha: f64, n: usize) -> usize {
    floor_count(alpha, n)
}

/// Rejects review fractions outside `(0, 1]`.
pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

/// Sorts by ascending score, ties by ascending index, and keeps the first
/// `floor(alpha * N)` entries. When that count is zero the single
/// lowest-scoring instance is returned instead.
pub fn rank_ascending(scores: &[f64], alpha: f64) -> Result<SuspicionRanking> {
    check_alpha(alpha)?;
    let n = scores.len();
    let mut k = review_size(alpha, n);
    if k == 0 && n > 0 {
        log::warn!(
            "alpha * N = {} < 1; returning the single most suspicious instance",
            alpha * n as f64
        );
        k = 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let suspects = order[..k]
        .iter()
        .map(|&index| Suspect {
            index,
            score: scores[index],
        })
        .collect();
    Ok(SuspicionRanking {
        alpha,
        n,
        suspects,
        full_scores: None,
        hyperparams: None,
        runtime_seconds: 0.0,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub selection: SelectionConfig,
    /// `None` keeps full scores when `N <= FULL_SCORES_AUTO_LIMIT`.
    pub retain_full_scores: Option<bool>,
}

/// Everything a detection run produces.
#[derive(Debug, Clone)]
pub struct Detection {
    pub ranking: SuspicionRanking,
    pub model: TrainedModel,
    pub cv_results: Vec<CvResult>,
}

/// Runs the full pipeline on a labeled dataset.
pub fn detect(
    dataset: &Dataset,
    alpha: f64,
    seed: u64,
    config: &DetectorConfig,
) -> Result<Detection> {
    check_alpha(alpha)?;
    // Surfaces empty classes before any training happens.
    class_weights(dataset.labels())?;
    let started = Instant::now();
    let prepared = preprocess(dataset);
    let run_seed = derive_seed(seed, &[stream::DETECT]);
    let selection = select_hyperparameters(&prepared, run_seed, &config.selection)?;
    let model = fit(&prepared, &selection.hyperparams)?;
    let probs = model.predict_proba(prepared.features())?;
    let scores = suspicion_scores(prepared.labels(), &probs)?;
    let mut ranking = rank_ascending(&scores, alpha)?;
    let keep = config
        .retain_full_scores
        .unwrap_or(dataset.len() <= FULL_SCORES_AUTO_LIMIT);
    ranking.full_scores = keep.then_some(scores);
    ranking.hyperparams = Some(selection.hyperparams);
    ranking.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(Detection {
        ranking,
        model,
        cv_results: selection.cv_results,
    })
}

/// [`detect`], keeping only the ranking.
pub fn find_mislabeled(
    dataset: &Dataset,
    alpha: f64,
    seed: u64,
    config: &DetectorConfig,
) -> Result<SuspicionRanking> {
    detect(dataset, alpha, seed, config).map(|d| d.ranking)
}

/// Class label as written to reports: the class name when known, else the
/// numeric index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelValue {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSuspect {
    pub index: usize,
    pub score: f64,
    pub original_label: LabelValue,
}

/// JSON report for a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub alpha: f64,
    pub n: usize,
    pub selected_hyperparams: Option<Hyperparams>,
    pub runtime_seconds: f64,
    pub suspects: Vec<ReportSuspect>,
}

impl DetectionReport {
    pub fn new(ranking: &SuspicionRanking, dataset: &Dataset) -> Self {
        let classes = dataset.class_indices();
        let suspects = ranking
            .suspects
            .iter()
            .map(|s| {
                let c = classes[s.index];
                ReportSuspect {
                    index: s.index,
                    score: s.score,
                    original_label: match dataset.class_names() {
                        Some(names) => LabelValue::Name(names[c].clone()),
                        None => LabelValue::Index(c),
                    },
                }
            })
            .collect();
        DetectionReport {
            alpha: ranking.alpha,
            n: ranking.n,
            selected_hyperparams: ranking.hyperparams,
            runtime_seconds: ranking.runtime_seconds,
            suspects,
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| Error::load(format!("report: {e}")))
    }

    /// CSV mirror with columns `index,score,original_label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::load(format!("report csv: {e}"));
        csv.write_record(["index", "score", "original_label"])
            .map_err(err)?;
        for s in &self.suspects {
            let label = match &s.original_label {
                LabelValue::Index(i) => i.to_string(),
                LabelValue::Name(n) => n.clone(),
            };
            csv.write_record([s.index.to_string(), s.score.to_string(), label])
                .map_err(err)?;
        }
        csv.flush()
            .map_err(|e| Error::load(format!("report csv: {e}")))
    }
}
