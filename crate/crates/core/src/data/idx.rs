//! IDX container format used by MNIST and its derivatives.
//!
//! ```text
//! images: 0x00000803 | count u32 | rows u32 | cols u32 | count*rows*cols bytes
//! labels: 0x00000801 | count u32 | count bytes
//! ```
//! All integers are big-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::{Dataset, DatasetKind};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| Error::load(format!("{what}: truncated header")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0, "idx images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::load(format!(
            "idx images: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, "idx images")? as usize;
    let rows = read_u32(bytes, 8, "idx images")? as usize;
    let cols = read_u32(bytes, 12, "idx images")? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::load("idx images: dimensions overflow"))?;
    let payload = &bytes[16..];
    if payload.len() < expected {
        return Err(Error::load(format!(
            "idx images: truncated payload, {} of {expected} bytes",
            payload.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload[..expected].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "idx labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::load(format!(
            "idx labels: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, "idx labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::load(format!(
            "idx labels: truncated payload, {} of {count} bytes",
            payload.len()
        )));
    }
    Ok(payload[..count].to_vec())
}

/// Loads an image/label IDX pair as an `(N, rows, cols, Ch)` image dataset.
/// Pixels keep their raw 0..=255 values. `replicate_channels` yields `Ch = 3`.
pub fn load_idx_images(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    replicate_channels: bool,
) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_idx_images(&fs::read(ip).map_err(|e| Error::io(ip, e))?)?;
    let labels = parse_idx_labels(&fs::read(lp).map_err(|e| Error::io(lp, e))?)?;
    if images.count == 0 {
        return Err(Error::load("idx images: file holds no images"));
    }
    if images.count != labels.len() {
        return Err(Error::load(format!(
            "idx: {} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let classes = *labels.iter().max().expect("non-empty") as usize + 1;
    let features = ArrayD::from_shape_vec(
        IxDyn(&[images.count, images.rows, images.cols, 1]),
        images.pixels.iter().map(|&p| p as f32).collect(),
    )
    .expect("payload length was checked");
    let codes: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let names = (0..classes).map(|c| c.to_string()).collect();
    let ds = Dataset::from_indices(features, &codes, classes, DatasetKind::Image, Some(names))?;
    if replicate_channels {
        ds.replicate_channels()
    } else {
        Ok(ds)
    }
}

pub fn write_idx_images<W: Write>(mut w: W, images: &IdxImages) -> std::io::Result<()> {
    assert_eq!(
        images.pixels.len(),
        images.count * images.rows * images.cols
    );
    w.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [images.count, images.rows, images.cols] {
        w.write_all(&(v as u32).to_be_bytes())?;
    }
    w.write_all(&images.pixels)
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u8]) -> std::io::Result<()> {
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)
}
