use ndarray::{Array2, ArrayD, ArrayView2, Axis, IxDyn};

use super::{decode_one_hot, Dataset, DatasetKind};
use crate::error::{Error, Result};

/// Feature-wise rescale to `[0, 1]`. Constant columns become all zeros.
pub fn min_max_scale(features: ArrayView2<'_, f32>) -> Array2<f32> {
    let mut out = features.to_owned();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            });
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| ((v as f64 - lo) / range) as f32);
        } else {
            col.fill(0.0);
        }
    }
    out
}

/// Per-feature standardization over axis 0: subtract the mean, divide by the
/// population standard deviation. Features with std below `1e-8` are only
/// centered.
pub fn standardize(features: &ArrayD<f32>) -> ArrayD<f32> {
    let shape = features.shape().to_vec();
    let n = shape[0];
    if n == 0 {
        return features.clone();
    }
    let d = features.len() / n;
    let flat = features
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n, d))
        .expect("contiguous reshape");

    let mut mean = vec![0.0f64; d];
    for row in flat.outer_iter() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0f64; d];
    for row in flat.outer_iter() {
        for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
            let dv = v as f64 - m;
            *s += dv * dv;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|s| {
            let std = (s / n as f64).sqrt();
            if std < 1e-8 {
                1.0
            } else {
                std
            }
        })
        .collect();

    let mut out = flat;
    for mut row in out.outer_iter_mut() {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&scale) {
            *v = ((*v as f64 - m) / s) as f32;
        }
    }
    out.into_shape_with_order(IxDyn(&shape))
        .expect("reshape back to original dims")
}

/// Balanced inverse-frequency class weights, `w_c = N / (C * N_c)`.
pub fn class_weights(labels: ArrayView2<'_, f32>) -> Result<Vec<f64>> {
    let (n, c) = labels.dim();
    let counts = class_counts(labels);
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::load(format!(
            "class {empty} has no instances; drop it from the label set before running"
        )));
    }
    Ok(counts
        .iter()
        .map(|&k| n as f64 / (c as f64 * k as f64))
        .collect())
}

/// Like [`class_weights`] but tolerates absent classes (weight 1). Used on
/// internal training splits, where an absent class contributes no samples.
pub(crate) fn class_weights_lenient(labels: ArrayView2<'_, f32>) -> Vec<f64> {
    let (n, c) = labels.dim();
    class_counts(labels)
        .iter()
        .map(|&k| {
            if k == 0 {
                1.0
            } else {
                n as f64 / (c as f64 * k as f64)
            }
        })
        .collect()
}

fn class_counts(labels: ArrayView2<'_, f32>) -> Vec<usize> {
    let mut counts = vec![0usize; labels.ncols()];
    for c in decode_one_hot(labels) {
        counts[c] += 1;
    }
    counts
}

/// Applies the preprocessing for the dataset's kind: min-max scaling for
/// numerical and (already embedded) text features, standardization for images.
pub fn preprocess(dataset: &Dataset) -> Dataset {
    let features = match dataset.kind() {
        DatasetKind::Numerical | DatasetKind::Text => {
            let x = dataset
                .features()
                .view()
                .into_dimensionality()
                .expect("tabular features are 2-D");
            min_max_scale(x).into_dyn()
        }
        DatasetKind::Image => standardize(dataset.features()),
    };
    dataset.with_features(features)
}
