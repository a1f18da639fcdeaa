//! α-precision, α-recall and the multi-run benchmark harness.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::detector::{detect, rank_ascending, review_size, DetectorConfig, SuspicionRanking};
use crate::error::{Error, Result};
use crate::nn::Hyperparams;
use crate::noise::{
    flip_at_random, flip_completely_at_random, ClassGroups, NoiseRecord, NoiseRegime,
};
use crate::rng::derive_seed;

fn check_sizes(ranking: &SuspicionRanking, record: &NoiseRecord) -> Result<()> {
    if ranking.n != record.n {
        return Err(Error::Shape {
            expected: format!("noise record over {} instances", ranking.n),
            actual: format!("{} instances", record.n),
        });
    }
    Ok(())
}

fn overlap(suspects: impl IntoIterator<Item = usize>, flipped: &[usize]) -> usize {
    suspects
        .into_iter()
        .filter(|i| flipped.binary_search(i).is_ok())
        .count()
}

/// `|I_alpha ∩ I| / |I_alpha|`.
pub fn alpha_precision(ranking: &SuspicionRanking, record: &NoiseRecord) -> Result<f64> {
    check_sizes(ranking, record)?;
    let listed = ranking.suspects.len();
    if listed == 0 {
        return Ok(0.0);
    }
    let hits = overlap(
        ranking.suspects.iter().map(|s| s.index),
        &record.flipped_indices,
    );
    Ok(hits as f64 / listed as f64)
}

/// `|I_alpha ∩ I| / |I|`, or `None` when nothing was flipped.
pub fn alpha_recall(ranking: &SuspicionRanking, record: &NoiseRecord) -> Result<Option<f64>> {
    check_sizes(ranking, record)?;
    if record.is_empty() {
        return Ok(None);
    }
    let hits = overlap(
        ranking.suspects.iter().map(|s| s.index),
        &record.flipped_indices,
    );
    Ok(Some(hits as f64 / record.len() as f64))
}

/// Precision and recall for every alpha, all from one score vector.
pub fn evaluate_alphas(
    scores: &[f64],
    alphas: &[f64],
    record: &NoiseRecord,
) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::config(format!("alpha must lie in (0, 1], got {a}")));
    }
    let max_alpha = alphas.iter().copied().fold(f64::NAN, f64::max);
    let full = rank_ascending(scores, max_alpha)?;
    let mut precision = Vec::with_capacity(alphas.len());
    let mut recall = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        // Rankings for smaller alphas are prefixes of the largest one.
        let k = review_size(alpha, scores.len())
            .max(1)
            .min(full.suspects.len());
        let prefix = SuspicionRanking {
            alpha,
            suspects: full.suspects[..k].to_vec(),
            ..full.clone()
        };
        precision.push(alpha_precision(&prefix, record)?);
        recall.push(alpha_recall(&prefix, record)?);
    }
    Ok((precision, recall))
}

/// How one benchmark run injects noise and detects it.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub mu: f64,
    pub alphas: Vec<f64>,
    pub runs: usize,
    pub regime: NoiseRegime,
    /// Required for [`NoiseRegime::AtRandom`].
    pub groups: Option<ClassGroups>,
    pub detector: DetectorConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            mu: 0.03,
            alphas: vec![0.01, 0.02, 0.03],
            runs: 5,
            regime: NoiseRegime::CompletelyAtRandom,
            groups: None,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub flipped: usize,
    pub precision: Vec<f64>,
    pub recall: Vec<Option<f64>>,
    pub hyperparams: Option<Hyperparams>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n: usize,
    pub mu: f64,
    pub regime: NoiseRegime,
    pub alphas: Vec<f64>,
    pub runs: usize,
    /// Per alpha, averaged over completed runs.
    pub mean_precision: Vec<f64>,
    /// Per alpha, averaged over runs where recall is defined.
    pub mean_recall: Vec<Option<f64>>,
    pub per_run: Vec<RunResult>,
    pub runtime_seconds: f64,
}

impl EvalReport {
    fn new(dataset: &str, n: usize, config: &BenchmarkConfig) -> Self {
        EvalReport {
            dataset: dataset.to_string(),
            n,
            mu: config.mu,
            regime: config.regime,
            alphas: config.alphas.clone(),
            runs: 0,
            mean_precision: vec![0.0; config.alphas.len()],
            mean_recall: vec![None; config.alphas.len()],
            per_run: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    fn push(&mut self, run: RunResult) {
        self.per_run.push(run);
        self.runs = self.per_run.len();
        for a in 0..self.alphas.len() {
            self.mean_precision[a] =
                self.per_run.iter().map(|r| r.precision[a]).sum::<f64>() / self.runs as f64;
            let defined: Vec<f64> = self.per_run.iter().filter_map(|r| r.recall[a]).collect();
            self.mean_recall[a] =
                (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Runtime, then precision and recall at each alpha.
    pub fn render_table(&self) -> String {
        let mut header = format!("{:<20} {:>10}", "dataset", "runtime");
        let mut row = format!("{:<20} {:>9.1}s", self.dataset, self.runtime_seconds);
        for (a, alpha) in self.alphas.iter().enumerate() {
            let _ = write!(header, " {:>9}", format!("P@{alpha}"));
            let _ = write!(row, " {:>9.2}", self.mean_precision[a]);
        }
        for (a, alpha) in self.alphas.iter().enumerate() {
            let _ = write!(header, " {:>9}", format!("R@{alpha}"));
            match self.mean_recall[a] {
                Some(r) => {
                    let _ = write!(row, " {r:>9.2}");
                }
                None => {
                    let _ = write!(row, " {:>9}", "n/a");
                }
            }
        }
        format!("{header}\n{row}\n")
    }
}

fn validate(config: &BenchmarkConfig) -> Result<()> {
    if config.alphas.is_empty() {
        return Err(Error::config("at least one alpha is required"));
    }
    if let Some(a) = config.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::config(format!("alpha must lie in (0, 1], got {a}")));
    }
    if config.runs == 0 {
        return Err(Error::config("runs must be at least 1"));
    }
    if config.regime == NoiseRegime::AtRandom && config.groups.is_none() {
        return Err(Error::config("at-random noise needs class groups"));
    }
    Ok(())
}

fn run_once(
    dataset: &Dataset,
    config: &BenchmarkConfig,
    run: usize,
    seed: u64,
) -> Result<RunResult> {
    let started = Instant::now();
    let (noisy, record) = match config.regime {
        NoiseRegime::CompletelyAtRandom => {
            flip_completely_at_random(dataset.labels(), config.mu, seed)?
        }
        NoiseRegime::AtRandom => {
            let groups = config.groups.as_ref().expect("validated");
            flip_at_random(dataset.labels(), config.mu, groups, seed)?
        }
    };
    let noisy = dataset.with_labels(noisy)?;
    let max_alpha = config.alphas.iter().copied().fold(f64::NAN, f64::max);
    let detector = DetectorConfig {
        retain_full_scores: Some(true),
        ..config.detector
    };
    let detection = detect(&noisy, max_alpha, seed, &detector)?;
    let scores = detection
        .ranking
        .full_scores
        .as_deref()
        .expect("full scores retained");
    let (precision, recall) = evaluate_alphas(scores, &config.alphas, &record)?;
    Ok(RunResult {
        run,
        seed,
        flipped: record.len(),
        precision,
        recall,
        hyperparams: detection.ranking.hyperparams,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Injects fresh noise and runs detection `config.runs` times, averaging
/// precision and recall per alpha. A failing run stops the benchmark; the
/// error carries the runs completed so far.
pub fn benchmark(
    dataset: &Dataset,
    name: &str,
    seed: u64,
    config: &BenchmarkConfig,
) -> Result<EvalReport> {
    validate(config)?;
    let started = Instant::now();
    let mut report = EvalReport::new(name, dataset.len(), config);
    for run in 0..config.runs {
        let run_seed = derive_seed(seed, &[run as u64]);
        match run_once(dataset, config, run, run_seed) {
            Ok(result) => {
                log::info!(
                    "run {}/{}: precision {:?} in {:.1}s",
                    run + 1,
                    config.runs,
                    result.precision,
                    result.runtime_seconds
                );
                report.push(result);
            }
            Err(source) => {
                report.runtime_seconds = started.elapsed().as_secs_f64();
                return Err(Error::BenchmarkAborted {
                    run,
                    partial: Box::new(report),
                    source: Box::new(source),
                });
            }
        }
    }
    report.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Suspect;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::Rng as _;
    use std::collections::HashSet;

    fn ranking(n: usize, indices: &[usize]) -> SuspicionRanking {
        SuspicionRanking {
            alpha: 1.0,
            n,
            suspects: indices
                .iter()
                .map(|&index| Suspect { index, score: 0.0 })
                .collect(),
            full_scores: None,
            hyperparams: None,
            runtime_seconds: 0.0,
        }
    }

    fn record(n: usize, flipped: &[usize]) -> NoiseRecord {
        let mut flipped = flipped.to_vec();
        flipped.sort_unstable();
        NoiseRecord {
            n,
            original_labels: vec![0; flipped.len()],
            new_labels: vec![1; flipped.len()],
            flipped_indices: flipped,
            mu: 0.1,
            regime: NoiseRegime::CompletelyAtRandom,
            seed: 0,
        }
    }

    #[test]
    fn metric_examples() {
        let (r, rec) = (ranking(10, &[1, 4]), record(10, &[1, 2, 3]));
        assert_eq!(alpha_precision(&r, &rec).unwrap(), 0.5);
        assert_eq!(alpha_recall(&r, &rec).unwrap(), Some(1.0 / 3.0));
        assert_eq!(alpha_precision(&ranking(10, &[1, 2]), &rec).unwrap(), 1.0);
        assert_eq!(alpha_precision(&ranking(10, &[5, 6]), &rec).unwrap(), 0.0);
        assert_eq!(
            alpha_recall(&ranking(10, &[3, 1, 2]), &rec).unwrap(),
            Some(1.0)
        );
        assert_eq!(alpha_recall(&r, &record(10, &[])).unwrap(), None);
        assert!(alpha_precision(&r, &record(11, &[1])).is_err());
    }

    #[test]
    fn brute_force_oracle_on_random_pairs() {
        let mut rng = rng_from_seed(42);
        for _ in 0..1000 {
            let n = rng.random_range(1..=200);
            let a = rng.random_range(1..=n);
            let i = rng.random_range(1..=n);
            let listed = sample(&mut rng, n, a).into_vec();
            let flipped = sample(&mut rng, n, i).into_vec();
            let both = listed.iter().filter(|x| flipped.contains(x)).count() as f64;
            let (r, rec) = (ranking(n, &listed), record(n, &flipped));
            assert_eq!(alpha_precision(&r, &rec).unwrap(), both / a as f64);
            assert_eq!(alpha_recall(&r, &rec).unwrap(), Some(both / i as f64));
        }
    }

    #[test]
    fn alpha_one_recovers_everything() {
        let scores: Vec<f64> = (0..50).map(|i| (i as f64 * 1.7).cos()).collect();
        let rec = record(50, &[3, 17, 40]);
        let (_, recall) = evaluate_alphas(&scores, &[1.0], &rec).unwrap();
        assert_eq!(recall, vec![Some(1.0)]);
    }

    proptest! {
        #[test]
        fn prefix_truncation_matches_reranking(
            scores in prop::collection::vec(0.0f64..1.0, 20..200),
            alphas in prop::collection::vec(0.01f64..1.0, 1..5),
            flips in prop::collection::hash_set(0usize..20, 1..10),
        ) {
            let n = scores.len();
            let rec = record(n, &flips.into_iter().collect::<Vec<_>>());
            let (p, r) = evaluate_alphas(&scores, &alphas, &rec).unwrap();
            for (a, &alpha) in alphas.iter().enumerate() {
                let direct = rank_ascending(&scores, alpha).unwrap();
                prop_assert_eq!(p[a], alpha_precision(&direct, &rec).unwrap());
                prop_assert_eq!(r[a], alpha_recall(&direct, &rec).unwrap());
            }
        }

        #[test]
        fn recall_and_hits_grow_with_alpha(
            scores in prop::collection::vec(0.0f64..1.0, 20..200),
            flips in prop::collection::hash_set(0usize..20, 1..10),
        ) {
            let n = scores.len();
            let rec = record(n, &flips.into_iter().collect::<Vec<_>>());
            let alphas = [0.05, 0.1, 0.3, 0.6, 1.0];
            let (p, r) = evaluate_alphas(&scores, &alphas, &rec).unwrap();
            let hits: Vec<f64> = alphas
                .iter()
                .zip(&p)
                .map(|(&a, &p)| p * rank_ascending(&scores, a).unwrap().suspects.len() as f64)
                .collect();
            prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(hits.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        }

        #[test]
        fn precision_equals_recall_at_mu(
            scores in prop::collection::vec(0.0f64..1.0, 34..300),
            seed: u64,
        ) {
            let n = scores.len();
            let mu = 0.03;
            let k = crate::rng::floor_count(mu, n);
            let mut rng = rng_from_seed(seed);
            let flipped: HashSet<usize> = sample(&mut rng, n, k).into_iter().collect();
            let rec = record(n, &flipped.into_iter().collect::<Vec<_>>());
            let (p, r) = evaluate_alphas(&scores, &[mu], &rec).unwrap();
            prop_assert_eq!(Some(p[0]), r[0]);
        }
    }

    #[test]
    fn report_means_skip_undefined_recall() {
        let config = BenchmarkConfig {
            alphas: vec![0.1],
            ..BenchmarkConfig::default()
        };
        let mut report = EvalReport::new("x", 10, &config);
        let run = |p: f64, r: Option<f64>| RunResult {
            run: 0,
            seed: 0,
            flipped: 1,
            precision: vec![p],
            recall: vec![r],
            hyperparams: None,
            runtime_seconds: 0.0,
        };
        report.push(run(1.0, Some(0.5)));
        report.push(run(0.0, None));
        assert_eq!(report.mean_precision, vec![0.5]);
        assert_eq!(report.mean_recall, vec![Some(0.5)]);
        assert!(report.render_table().contains("P@0.1"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let x = ndarray::ArrayD::zeros(ndarray::IxDyn(&[100, 2]));
        let y: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let ds =
            Dataset::from_indices(x, &y, 2, crate::data::DatasetKind::Numerical, None).unwrap();
        let bad = [
            BenchmarkConfig {
                alphas: vec![],
                ..Default::default()
            },
            BenchmarkConfig {
                alphas: vec![1.5],
                ..Default::default()
            },
            BenchmarkConfig {
                runs: 0,
                ..Default::default()
            },
            BenchmarkConfig {
                regime: NoiseRegime::AtRandom,
                ..Default::default()
            },
        ];
        for config in &bad {
            assert!(matches!(
                benchmark(&ds, "x", 0, config),
                Err(Error::Config(_))
            ));
        }
    }
}
