//! Model checkpoint container.
//!
//! ```text
//! magic    8 bytes  "LSIFTCKP"
//! version  u32 LE   currently 1
//! hlen     u32 LE   length of the JSON header
//! header   hlen bytes of UTF-8 JSON: {"architecture": .., "metadata": ..}
//! count    u32 LE   number of tensors
//! tensors  per tensor: rank u32 LE, rank dims u32 LE, f32 LE payload
//! ```
//! Tensors are the weight then bias of each parametric layer, in layer order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{TrainedModel, TrainingMetadata};
use super::network::Architecture;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const MAGIC: &[u8; 8] = b"LSIFTCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    metadata: TrainingMetadata,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::load(format!("checkpoint: {}", msg.into()))
}

pub fn write_checkpoint<W: Write>(model: &TrainedModel, mut w: W) -> std::io::Result<()> {
    let header = serde_json::to_vec(&Header {
        architecture: model.architecture,
        metadata: model.metadata.clone(),
    })
    .expect("header serializes");
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let params = model.network.parameters();
    w.write_all(&(params.len() as u32 * 2).to_le_bytes())?;
    for (weight, bias) in params {
        write_tensor(&mut w, weight.shape(), weight.iter().copied())?;
        write_tensor(&mut w, bias.shape(), bias.iter().copied())?;
    }
    Ok(())
}

fn write_tensor<W: Write>(
    w: &mut W,
    shape: &[usize],
    values: impl Iterator<Item = f32>,
) -> std::io::Result<()> {
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| bad(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_tensor<R: Read>(r: &mut R, expected: &[usize]) -> Result<Vec<f32>> {
    let rank = read_u32(r)? as usize;
    let dims = (0..rank)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims != expected {
        return Err(bad(format!(
            "tensor shape {dims:?} does not match the architecture ({expected:?})"
        )));
    }
    let len: usize = dims.iter().product();
    let mut raw = vec![0u8; len * 4];
    r.read_exact(&mut raw).map_err(|e| bad(e.to_string()))?;
    Ok(raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<TrainedModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let hlen = read_u32(&mut r)? as usize;
    let mut header = vec![0u8; hlen];
    r.read_exact(&mut header).map_err(|e| bad(e.to_string()))?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;

    let mut network = header.architecture.build::<f32>(&mut rng_from_seed(0));
    let mut params = network.parameters_mut();
    let count = read_u32(&mut r)? as usize;
    if count != params.len() * 2 {
        return Err(bad(format!(
            "{count} tensors stored, architecture needs {}",
            params.len() * 2
        )));
    }
    for (weight, bias) in params.iter_mut() {
        let w = read_tensor(&mut r, weight.shape())?;
        weight.iter_mut().zip(w).for_each(|(d, s)| *d = s);
        let b = read_tensor(&mut r, bias.shape())?;
        bias.iter_mut().zip(b).for_each(|(d, s)| *d = s);
    }
    Ok(TrainedModel::new(
        header.architecture,
        network,
        header.metadata,
    ))
}

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(model, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
