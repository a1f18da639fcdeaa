//! Training, prediction and checkpoint behavior of the classifiers.

use labelsift::data::{preprocess, Dataset, DatasetKind};
use labelsift::nn::{
    fit_dense, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, GridPoint,
    Hyperparams, StoppingMonitor,
};
use labelsift::{make_blobs, Error};
use ndarray::{ArrayD, Axis, IxDyn};

fn point(depth: usize, units: usize, dropout: f64) -> GridPoint {
    GridPoint {
        depth,
        units,
        dropout,
    }
}

/// Nearest-class-mean classifier, an independent baseline.
fn nearest_mean_accuracy(ds: &Dataset) -> f64 {
    let x = ds.flat_features();
    let classes = ds.class_indices();
    let c = ds.num_classes();
    let mut means = vec![vec![0.0f64; x.ncols()]; c];
    let counts = ds.class_counts();
    for (row, &k) in x.outer_iter().zip(&classes) {
        for (m, &v) in means[k].iter_mut().zip(row) {
            *m += v as f64 / counts[k] as f64;
        }
    }
    let correct = x
        .outer_iter()
        .zip(&classes)
        .filter(|(row, &k)| {
            let dist = |m: &Vec<f64>| -> f64 {
                m.iter()
                    .zip(row.iter())
                    .map(|(a, &b)| (a - b as f64).powi(2))
                    .sum()
            };
            (0..c).min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b]))) == Some(k)
        })
        .count();
    correct as f64 / classes.len() as f64
}

#[test]
fn dense_network_separates_blobs() {
    let ds = preprocess(&make_blobs(600, 2, 3, 11).unwrap());
    let baseline = nearest_mean_accuracy(&ds);
    assert!(
        baseline >= 0.95,
        "blobs should be separable, baseline {baseline}"
    );

    let model = fit_dense(&ds, &Hyperparams::dense(point(2, 50, 0.0), 3)).unwrap();
    let predicted = model
        .predict_proba(ds.features())
        .unwrap()
        .predicted_classes();
    let truth = ds.class_indices();
    let acc =
        predicted.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
    // Early stopping keeps the first epoch at which the hold-out saturates.
    assert!(
        acc >= baseline - 0.05,
        "network {acc} vs baseline {baseline}"
    );
    assert_eq!(
        model.metadata().monitor,
        StoppingMonitor::ValidationAccuracy
    );
    assert!(model.metadata().best_epoch <= model.metadata().epochs_run);
}

#[test]
fn same_seed_gives_identical_parameters() {
    let ds = preprocess(&make_blobs(300, 4, 3, 5).unwrap());
    let mut hp = Hyperparams::dense(point(2, 16, 0.2), 99);
    hp.max_epochs = 20;
    let a = fit_dense(&ds, &hp).unwrap();
    let b = fit_dense(&ds, &hp).unwrap();
    assert_eq!(a, b);
    hp.seed = 100;
    let c = fit_dense(&ds, &hp).unwrap();
    assert_ne!(a.network(), c.network());
}

#[test]
fn full_batch_loss_decreases_with_small_learning_rate() {
    let x = ArrayD::from_shape_fn(IxDyn(&[40, 3]), |ix| {
        let (i, j) = (ix[0], ix[1]);
        ((i * 7 + j * 3) % 11) as f32 / 11.0 + if i % 2 == 0 { 0.5 } else { 0.0 }
    });
    let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let ds = Dataset::from_indices(x, &y, 2, DatasetKind::Numerical, None).unwrap();
    let mut hp = Hyperparams::dense(point(2, 10, 0.0), 1);
    hp.learning_rate = 1e-3;
    hp.batch_size = 64;
    hp.max_epochs = 20;
    hp.patience = 100;
    let model = fit_dense(&ds, &hp).unwrap();
    let losses = &model.metadata().epoch_losses;
    assert_eq!(losses.len(), 20);
    assert!(
        losses.windows(2).all(|w| w[1] <= w[0]),
        "loss went up: {losses:?}"
    );
}

#[test]
fn probabilities_are_distributions() {
    let ds = preprocess(&make_blobs(200, 3, 4, 2).unwrap());
    let mut hp = Hyperparams::dense(point(1, 8, 0.1), 4);
    hp.max_epochs = 5;
    let model = fit_dense(&ds, &hp).unwrap();
    let probs = model.predict_proba(ds.features()).unwrap();
    assert_eq!(probs.probabilities().dim(), (200, 4));
    for row in probs.probabilities().outer_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
    let wrong = ArrayD::zeros(IxDyn(&[5, 2]));
    assert!(matches!(
        model.predict_proba(&wrong),
        Err(Error::Shape { .. })
    ));
    // Chunked prediction agrees with row-by-row prediction.
    let single = model
        .predict_proba(&ds.features().select(Axis(0), &[17]))
        .unwrap();
    assert_eq!(single.probabilities().row(0), probs.probabilities().row(17));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let ds = preprocess(&make_blobs(150, 3, 3, 8).unwrap());
    let mut hp = Hyperparams::dense(point(3, 12, 0.1), 6);
    hp.max_epochs = 4;
    let model = fit_dense(&ds, &hp).unwrap();

    let mut bytes = Vec::new();
    write_checkpoint(&model, &mut bytes).unwrap();
    let restored = read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(restored, model);
    let mut again = Vec::new();
    write_checkpoint(&restored, &mut again).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(
        restored.predict_proba(ds.features()).unwrap(),
        model.predict_proba(ds.features()).unwrap()
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), model);

    assert!(read_checkpoint(&b"NOTACKPT"[..]).is_err());
    assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
}
