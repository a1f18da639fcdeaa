//! Find likely-mislabeled instances in classification datasets.
//!
//! A classifier is trained on the (possibly noisy) labeled data, every
//! instance is re-scored by the predicted probability of its own label, and
//! the `floor(alpha * N)` lowest-scoring instances are returned for review.
//! Hyperparameters are chosen automatically, so the only inputs are the
//! dataset and `alpha`.
//!
//! ```no_run
//! use labelsift::{find_mislabeled, make_blobs, DetectorConfig};
//!
//! let data = make_blobs(1000, 4, 3, 7)?;
//! let ranking = find_mislabeled(&data, 0.01, 7, &DetectorConfig::default())?;
//! for suspect in &ranking.suspects {
//!     println!("{} {:.3}", suspect.index, suspect.score);
//! }
//! # Ok::<(), labelsift::Error>(())
//! ```

pub mod data;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod model_selection;
pub mod nn;
pub mod noise;
pub mod rng;
pub mod synthetic;

pub use data::{Dataset, DatasetKind};
pub use detector::{
    detect, find_mislabeled, rank_ascending, suspicion_scores, Detection, DetectionReport,
    DetectorConfig, Suspect, SuspicionRanking,
};
pub use error::{Error, ErrorCategory, Result};
pub use evaluation::{alpha_precision, alpha_recall, benchmark, BenchmarkConfig, EvalReport};
pub use model_selection::{select_hyperparameters, SelectionConfig};
pub use nn::{Hyperparams, PredictionMatrix, TrainedModel};
pub use noise::{flip_at_random, flip_completely_at_random, ClassGroups, NoiseRecord, NoiseRegime};
pub use synthetic::{glyph_dataset, make_blobs, make_classification, make_glyphs};
