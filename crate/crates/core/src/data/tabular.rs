use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::{factorize, Dataset, DatasetKind};
use crate::error::{Error, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings select by index, anything else by name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
}

impl Default for TabularOptions {
    fn default() -> Self {
        TabularOptions {
            has_header: true,
            label_column: LabelColumn::Name("label".into()),
        }
    }
}

pub fn load_tabular(path: impl AsRef<Path>, options: &TabularOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tabular(file, options)
}

/// Parses a CSV table: every non-label column must be numeric; labels are
/// factorized in order of first appearance.
pub fn read_tabular<R: Read>(reader: R, options: &TabularOptions) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .from_reader(reader);

    let headers: Option<Vec<String>> = if options.has_header {
        let h = csv
            .headers()
            .map_err(|e| Error::load(format!("csv header: {e}")))?;
        Some(h.iter().map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let label_idx = match (&options.label_column, &headers) {
        (LabelColumn::Name(name), Some(h)) => h
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::config(format!("label column {name:?} not found in header")))?,
        (LabelColumn::Name(name), None) => {
            return Err(Error::config(format!(
                "label column {name:?} selected by name but the CSV has no header"
            )))
        }
        (LabelColumn::Index(i), _) => *i,
    };

    let mut values: Vec<f32> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;
    for (row, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::load(format!("csv row {row}: {e}")))?;
        if label_idx >= record.len() {
            return Err(Error::config(format!(
                "label column index {label_idx} out of range for {} columns",
                record.len()
            )));
        }
        width.get_or_insert(record.len());
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(cell.trim().to_string());
                continue;
            }
            let v: f32 = cell.trim().parse().map_err(|_| {
                let name = headers
                    .as_ref()
                    .map(|h| format!(" ({})", h[col]))
                    .unwrap_or_default();
                Error::load(format!(
                    "csv row {row}, column {col}{name}: cannot parse {cell:?} as a number"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::load(format!(
                    "csv row {row}, column {col}: non-finite value {cell:?}"
                )));
            }
            values.push(v);
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::load("csv contains no data rows"));
    }
    let d = width.unwrap_or(1) - 1;
    let (codes, names) = factorize(&labels);
    let features = ArrayD::from_shape_vec(IxDyn(&[n, d]), values)
        .map_err(|e| Error::load(format!("csv: {e}")))?;
    let c = names.len();
    Dataset::from_indices(features, &codes, c, DatasetKind::Numerical, Some(names))
}

/// Writes `f0..f{D-1},label` with a header. Features use the shortest
/// representation that parses back to the same `f32`.
pub fn write_tabular<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    if dataset.features().ndim() != 2 {
        return Err(Error::config("only (N, D) datasets can be written as CSV"));
    }
    let d = dataset.instance_shape()[0];
    let mut csv = csv::Writer::from_writer(writer);
    let to_load = |e: csv::Error| Error::load(format!("csv write: {e}"));
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    csv.write_record(&header).map_err(to_load)?;
    let x = dataset.flat_features();
    for (row, class) in x.outer_iter().zip(dataset.class_indices()) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(dataset.class_label(class));
        csv.write_record(&record).map_err(to_load)?;
    }
    csv.flush()
        .map_err(|e| Error::load(format!("csv write: {e}")))?;
    Ok(())
}
