//! Datasets: the in-memory representation, loaders for the supported file
//! formats, and the per-kind preprocessing.

mod embedding;
mod idx;
mod preprocess;
mod tabular;
mod text;

use std::fmt;

use ndarray::{Array2, ArrayD, ArrayView2, Axis, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{embed_document, EmbeddingTable};
pub use idx::{
    load_idx_images, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels,
    IdxImages,
};
pub(crate) use preprocess::class_weights_lenient;
pub use preprocess::{class_weights, min_max_scale, preprocess, standardize};
pub use tabular::{load_tabular, read_tabular, write_tabular, LabelColumn, TabularOptions};
pub use text::{load_text, read_label_lines, TextDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Numerical,
    Image,
    Text,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Numerical => "numerical",
            DatasetKind::Image => "image",
            DatasetKind::Text => "text",
        })
    }
}

/// Features plus one-hot labels.
///
/// Features are `(N, D)` for numerical and text data and `(N, H, W, Ch)` for
/// images. Every constructor checks that each label row is one-hot, that
/// `N >= C >= 2`, that all features are finite, and that images have one or
/// three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: ArrayD<f32>,
    labels: Array2<f32>,
    kind: DatasetKind,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: ArrayD<f32>,
        labels: Array2<f32>,
        kind: DatasetKind,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.shape().first().copied().unwrap_or(0);
        let (rows, classes) = labels.dim();
        if n != rows {
            return Err(Error::Shape {
                expected: format!("{n} label rows"),
                actual: format!("{rows}"),
            });
        }
        if classes < 2 {
            return Err(Error::load(format!(
                "a classification dataset needs at least 2 classes, found {classes}"
            )));
        }
        if n < classes {
            return Err(Error::load(format!(
                "dataset has {n} instances but {classes} classes; need N >= C"
            )));
        }
        match kind {
            DatasetKind::Image => {
                if features.ndim() != 4 {
                    return Err(Error::Shape {
                        expected: "(N, H, W, Ch) image tensor".into(),
                        actual: format!("{:?}", features.shape()),
                    });
                }
                let ch = features.shape()[3];
                if ch != 1 && ch != 3 {
                    return Err(Error::load(format!(
                        "images must have 1 or 3 channels, found {ch}"
                    )));
                }
            }
            DatasetKind::Numerical | DatasetKind::Text => {
                if features.ndim() != 2 {
                    return Err(Error::Shape {
                        expected: "(N, D) feature matrix".into(),
                        actual: format!("{:?}", features.shape()),
                    });
                }
            }
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let per_row = features.len() / n.max(1);
            return Err(Error::load(format!(
                "non-finite feature value in row {}",
                pos / per_row.max(1)
            )));
        }
        for (row, label) in labels.outer_iter().enumerate() {
            let ones = label.iter().filter(|&&v| v == 1.0).count();
            let zeros = label.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != classes {
                return Err(Error::load(format!("label row {row} is not one-hot")));
            }
        }
        if let Some(names) = &class_names {
            if names.len() != classes {
                return Err(Error::load(format!(
                    "{} class names given for {classes} classes",
                    names.len()
                )));
            }
        }
        Ok(Dataset {
            features,
            labels,
            kind,
            class_names,
        })
    }

    /// Builds a dataset from class indices instead of one-hot rows.
    pub fn from_indices(
        features: ArrayD<f32>,
        classes: &[usize],
        num_classes: usize,
        kind: DatasetKind,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let labels = one_hot_encode(classes, num_classes)?;
        Dataset::new(features, labels, kind, class_names)
    }

    pub fn len(&self) -> usize {
        self.labels.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.labels.ncols()
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn features(&self) -> &ArrayD<f32> {
        &self.features
    }

    pub fn labels(&self) -> ArrayView2<'_, f32> {
        self.labels.view()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Shape of a single instance, i.e. the feature shape without `N`.
    pub fn instance_shape(&self) -> &[usize] {
        &self.features.shape()[1..]
    }

    pub fn class_indices(&self) -> Vec<usize> {
        decode_one_hot(self.labels.view())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for c in self.class_indices() {
            counts[c] += 1;
        }
        counts
    }

    /// Human-facing name of class `class`: its recorded name, or the index.
    pub fn class_label(&self, class: usize) -> String {
        match &self.class_names {
            Some(names) => names[class].clone(),
            None => class.to_string(),
        }
    }

    /// Same features, new labels (e.g. after noise injection).
    pub fn with_labels(&self, labels: Array2<f32>) -> Result<Dataset> {
        if labels.dim() != self.labels.dim() {
            return Err(Error::Shape {
                expected: format!("{:?}", self.labels.dim()),
                actual: format!("{:?}", labels.dim()),
            });
        }
        Dataset::new(
            self.features.clone(),
            labels,
            self.kind,
            self.class_names.clone(),
        )
    }

    pub(crate) fn with_features(&self, features: ArrayD<f32>) -> Dataset {
        debug_assert_eq!(features.shape()[0], self.len());
        Dataset {
            features,
            labels: self.labels.clone(),
            kind: self.kind,
            class_names: self.class_names.clone(),
        }
    }

    /// Row subset. The result may violate `N >= C`; it is meant for internal
    /// splits, not as a user-facing dataset.
    pub(crate) fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.select(Axis(0), indices),
            kind: self.kind,
            class_names: self.class_names.clone(),
        }
    }

    /// Features viewed as an `(N, D)` matrix, flattening image dimensions.
    pub fn flat_features(&self) -> Array2<f32> {
        let n = self.len();
        let d = self.features.len() / n.max(1);
        self.features
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, d))
            .expect("contiguous features reshape")
    }

    /// Replicates a single grey channel into three, giving `(N, H, W, 3)`.
    pub fn replicate_channels(&self) -> Result<Dataset> {
        if self.kind != DatasetKind::Image || self.features.shape()[3] != 1 {
            return Err(Error::config(
                "channel replication applies to single-channel images only",
            ));
        }
        let s = self.features.shape();
        let (n, h, w) = (s[0], s[1], s[2]);
        let grey = self.features.as_standard_layout();
        let mut out = ArrayD::zeros(IxDyn(&[n, h, w, 3]));
        for (dst, &v) in out
            .as_slice_mut()
            .expect("fresh array is contiguous")
            .chunks_exact_mut(3)
            .zip(grey.iter())
        {
            dst.fill(v);
        }
        Ok(self.with_features(out))
    }
}

/// One-hot encodes class indices into an `(N, C)` matrix.
pub fn one_hot_encode(labels: &[usize], num_classes: usize) -> Result<Array2<f32>> {
    let mut out = Array2::zeros((labels.len(), num_classes));
    for (row, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::InvalidLabel {
                row,
                label: label as i64,
                classes: num_classes,
            });
        }
        out[[row, label]] = 1.0;
    }
    Ok(out)
}

/// Signed variant of [`one_hot_encode`] for inputs that may carry negative
/// class codes.
pub fn one_hot_encode_signed(labels: &[i64], num_classes: usize) -> Result<Array2<f32>> {
    let mut idx = Vec::with_capacity(labels.len());
    for (row, &label) in labels.iter().enumerate() {
        if label < 0 || label as usize >= num_classes {
            return Err(Error::InvalidLabel {
                row,
                label,
                classes: num_classes,
            });
        }
        idx.push(label as usize);
    }
    one_hot_encode(&idx, num_classes)
}

/// Row-wise argmax; the inverse of [`one_hot_encode`].
pub fn decode_one_hot(labels: ArrayView2<'_, f32>) -> Vec<usize> {
    labels
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Assigns class indices in order of first appearance.
pub(crate) fn factorize<S: AsRef<str>>(values: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    let codes = values
        .iter()
        .map(|v| {
            let v = v.as_ref();
            *lookup.entry(v.to_string()).or_insert_with(|| {
                names.push(v.to_string());
                names.len() - 1
            })
        })
        .collect();
    (codes, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn one_hot_examples() {
        assert_eq!(
            one_hot_encode(&[1, 0], 2).unwrap(),
            array![[0.0, 1.0], [1.0, 0.0]]
        );
        assert_eq!(one_hot_encode(&[0], 3).unwrap(), array![[1.0, 0.0, 0.0]]);
        match one_hot_encode(&[2], 2) {
            Err(Error::InvalidLabel {
                row: 0, label: 2, ..
            }) => {}
            other => panic!("expected invalid label, got {other:?}"),
        }
        assert!(matches!(
            one_hot_encode_signed(&[0, -1], 2),
            Err(Error::InvalidLabel {
                row: 1,
                label: -1,
                ..
            })
        ));
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(labels in prop::collection::vec(0usize..7, 1..50)) {
            let encoded = one_hot_encode(&labels, 7).unwrap();
            prop_assert_eq!(decode_one_hot(encoded.view()), labels);
        }
    }

    #[test]
    fn factorize_uses_first_appearance() {
        let (codes, names) = factorize(&["b", "a", "b", "c"]);
        assert_eq!(codes, vec![0, 1, 0, 2]);
        assert_eq!(names, vec!["b", "a", "c"]);
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        let x = ArrayD::zeros(IxDyn(&[3, 2]));
        assert!(
            Dataset::from_indices(x.clone(), &[0, 1, 0], 2, DatasetKind::Numerical, None).is_ok()
        );
        // fewer instances than classes
        assert!(
            Dataset::from_indices(x.clone(), &[0, 1, 2], 4, DatasetKind::Numerical, None).is_err()
        );
        // single class
        assert!(
            Dataset::from_indices(x.clone(), &[0, 0, 0], 1, DatasetKind::Numerical, None).is_err()
        );
        let mut bad = x.clone();
        bad[[1, 1]] = f32::NAN;
        assert!(Dataset::from_indices(bad, &[0, 1, 0], 2, DatasetKind::Numerical, None).is_err());
        let two_hot = array![[1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(Dataset::new(x.clone(), two_hot, DatasetKind::Numerical, None).is_err());
        let img = ArrayD::zeros(IxDyn(&[2, 4, 4, 2]));
        assert!(Dataset::from_indices(img, &[0, 1], 2, DatasetKind::Image, None).is_err());
    }

    #[test]
    fn replicate_channels_copies_grey_values() {
        let mut img = ArrayD::zeros(IxDyn(&[2, 2, 2, 1]));
        img[[1, 0, 1, 0]] = 7.0;
        let ds = Dataset::from_indices(img, &[0, 1], 2, DatasetKind::Image, None).unwrap();
        let rgb = ds.replicate_channels().unwrap();
        assert_eq!(rgb.instance_shape(), &[2, 2, 3]);
        for c in 0..3 {
            assert_eq!(rgb.features()[[1, 0, 1, c]], 7.0);
            assert_eq!(rgb.features()[[0, 0, 1, c]], 0.0);
        }
    }
}
