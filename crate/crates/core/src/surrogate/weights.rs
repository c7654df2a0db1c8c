//! TIMW weights file.
//!
//! Layout (little-endian): magic `TIMW`, `u16` version, `u32` byte length of
//! a UTF-8 JSON header, the header, then every tensor as raw `f32` values in
//! header order (weight before bias, layers in order).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::{layer_plan, Layer, Network};
use super::tensor::Tensor;
use super::{Hyperparams, SurrogateError, SurrogateModel};
use crate::grid::GridSpec;

pub const TIMW_MAGIC: [u8; 4] = *b"TIMW";
pub const TIMW_VERSION: u16 = 1;

const MAX_HEADER_BYTES: u32 = 16 << 20;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weights file: expected magic \"TIMW\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported weights file version {0} (expected {TIMW_VERSION})")]
    BadVersion(u16),
    #[error("malformed weights header: {0}")]
    Header(String),
    #[error("weights file is truncated")]
    Truncated,
    #[error(transparent)]
    Model(#[from] SurrogateError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    layer: Layer,
    weight_shape: Vec<usize>,
    bias_shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    hyperparams: Hyperparams,
    input_scale: f64,
    resolution: GridSpec,
    layers: Vec<LayerEntry>,
}

fn layer_name(layer: &Layer, index: usize) -> String {
    match layer {
        Layer::Conv { .. } => format!("conv{index}"),
        Layer::Dense { .. } => format!("dense{index}"),
    }
}

pub fn write_weights<W: Write>(mut out: W, model: &SurrogateModel) -> Result<(), WeightsError> {
    let net = model.network();
    let header = Header {
        hyperparams: *model.hyperparams(),
        input_scale: model.input_scale(),
        resolution: net.spec(),
        layers: net
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| LayerEntry {
                name: layer_name(l, i),
                layer: *l,
                weight_shape: l.weight_shape(),
                bias_shape: l.bias_shape(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| WeightsError::Header(e.to_string()))?;
    out.write_all(&TIMW_MAGIC)?;
    out.write_all(&TIMW_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::new();
    for t in net.params() {
        buf.clear();
        buf.reserve(t.len() * 4);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<(), WeightsError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => WeightsError::Truncated,
        _ => WeightsError::Io(e),
    })
}

pub fn read_weights<R: Read>(mut input: R) -> Result<SurrogateModel, WeightsError> {
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut input, &mut magic)?;
    if magic != TIMW_MAGIC {
        return Err(WeightsError::BadMagic(magic));
    }
    let mut b2 = [0u8; 2];
    read_exact_or_truncated(&mut input, &mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != TIMW_VERSION {
        return Err(WeightsError::BadVersion(version));
    }
    let mut b4 = [0u8; 4];
    read_exact_or_truncated(&mut input, &mut b4)?;
    let len = u32::from_le_bytes(b4);
    if len > MAX_HEADER_BYTES {
        return Err(WeightsError::Header(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    read_exact_or_truncated(&mut input, &mut json)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| WeightsError::Header(e.to_string()))?;

    let spec = GridSpec::new(header.resolution.height, header.resolution.width)
        .map_err(|e| WeightsError::Header(e.to_string()))?;
    let plan = layer_plan(&header.hyperparams.architecture(), spec).map_err(SurrogateError::from)?;
    if plan.len() != header.layers.len()
        || plan.iter().zip(&header.layers).any(|(p, e)| {
            *p != e.layer || p.weight_shape() != e.weight_shape || p.bias_shape() != e.bias_shape
        })
    {
        return Err(WeightsError::Header(
            "layer list does not match the hyperparameters".into(),
        ));
    }
    let mut params = Vec::with_capacity(2 * plan.len());
    for entry in &header.layers {
        for shape in [&entry.weight_shape, &entry.bias_shape] {
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 4];
            read_exact_or_truncated(&mut input, &mut raw)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push(Tensor {
                shape: shape.clone(),
                data,
            });
        }
    }
    let net = Network::from_params(&header.hyperparams.architecture(), spec, params)
        .map_err(SurrogateError::from)?;
    Ok(SurrogateModel::new(header.hyperparams, net, header.input_scale)?)
}

pub fn save_weights(path: impl AsRef<Path>, model: &SurrogateModel) -> Result<(), WeightsError> {
    write_weights(BufWriter::new(File::create(path)?), model)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<SurrogateModel, WeightsError> {
    read_weights(BufReader::new(File::open(path)?))
}
