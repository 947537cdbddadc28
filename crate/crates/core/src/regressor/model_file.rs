//! Binary model file: little-endian, magic `F2MW`, format version, the number
//! of `layer_dims` entries, the dims themselves, then for every layer its
//! row-major `f64` weights followed by its `f64` biases.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Layer, MlpRegressor};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"F2MW";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &MlpRegressor) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut out = Vec::with_capacity(12 + 4 * dims.len() + 8 * model.param_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for layer in model.layers() {
        for w in layer.weight.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.bias.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn model_from_bytes(bytes: &[u8], path: &Path) -> Result<MlpRegressor> {
    let err = |msg: String| Error::format(path, msg);
    let truncated = || err("truncated model file".into());
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4) != Some(MODEL_MAGIC.as_slice()) {
        return Err(err("bad magic, expected F2MW".into()));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != MODEL_VERSION {
        return Err(err(format!("unsupported model version {version}")));
    }
    let n_dims = r.u32().ok_or_else(truncated)? as usize;
    if !(2..=1024).contains(&n_dims) {
        return Err(err(format!("implausible layer_dims length {n_dims}")));
    }
    let dims: Vec<usize> = (0..n_dims)
        .map(|_| r.u32().map(|d| d as usize).ok_or_else(truncated))
        .collect::<Result<_>>()?;
    let expected = super::mlp::param_count_for(&dims) * 8;
    if bytes.len().saturating_sub(r.pos) != expected {
        return Err(err(format!(
            "layer dims {dims:?} need {expected} payload bytes, file has {}",
            bytes.len().saturating_sub(r.pos)
        )));
    }
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let (inp, out) = (w[0], w[1]);
        let weights: Vec<f64> = (0..inp * out).map(|_| r.f64().unwrap()).collect();
        let bias: Vec<f64> = (0..out).map(|_| r.f64().unwrap()).collect();
        layers.push(Layer {
            weight: Array2::from_shape_vec((out, inp), weights).expect("sized above"),
            bias: Array1::from(bias),
        });
    }
    MlpRegressor::from_layers(layers).map_err(|e| err(e.to_string()))
}

pub fn write_model(model: &MlpRegressor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<MlpRegressor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}
