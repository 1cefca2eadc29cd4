//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "QNN1"
//! u32 layer_count
//! u32 input_units        f64 dropout
//! per layer:
//!   u8 kind_tag  u8 activation_tag  u8 flags (bit0 bias, bit1 bidirectional)  u8 0
//!   u32 units    u32 tensor_count
//!   per tensor:  u32 rows  u32 cols  u32 planes  then planes × rows × cols f64,
//!                plane order r, i, j, k, each plane row-major
//! ```
//!
//! Tensors appear in the canonical parameter order of [`Model::params`].

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::qcore::Activation;
use crate::qnet::{LayerKind, LayerSpec, Model, ModelSpec};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QNN1";

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(spec.layers.len() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.input_units as u32).to_le_bytes());
    out.extend_from_slice(&spec.dropout.to_le_bytes());
    for (ls, layer) in spec.layers.iter().zip(model.layers()) {
        let flags = u8::from(ls.bias) | (u8::from(ls.bidirectional) << 1);
        out.extend_from_slice(&[ls.kind.tag(), ls.activation.tag(), flags, 0]);
        out.extend_from_slice(&(ls.units as u32).to_le_bytes());
        let params = layer.params();
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for (_, t) in params {
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
            out.extend_from_slice(&(t.algebra().dim() as u32).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.buf.len() {
            return Err(FormatError::Truncated {
                expected: self.pos + n,
                found: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic = c.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        if &magic[..3] == b"QNN" {
            return Err(FormatError::VersionMismatch {
                found: String::from_utf8_lossy(magic).into_owned(),
                expected: "QNN1".into(),
            }
            .into());
        }
        return Err(FormatError::MalformedHeader("bad checkpoint magic".into()).into());
    }
    let n_layers = c.u32()? as usize;
    let input_units = c.u32()? as usize;
    let dropout = c.f64()?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut blobs = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let kind = LayerKind::from_tag(c.u8()?)
            .ok_or_else(|| FormatError::MalformedHeader(format!("layer {i}: unknown kind tag")))?;
        let activation = Activation::from_tag(c.u8()?)
            .ok_or_else(|| FormatError::MalformedHeader(format!("layer {i}: unknown activation tag")))?;
        let flags = c.u8()?;
        let _reserved = c.u8()?;
        let units = c.u32()? as usize;
        layers.push(LayerSpec {
            kind,
            units,
            activation,
            bias: flags & 1 != 0,
            bidirectional: flags & 2 != 0,
        });
        let count = c.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = c.u32()? as usize;
            let cols = c.u32()? as usize;
            let planes = c.u32()? as usize;
            let n = rows * cols * planes;
            let raw = c.take(n * 8)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            tensors.push((rows, cols, planes, data));
        }
        blobs.push(tensors);
    }
    if c.pos != bytes.len() {
        return Err(FormatError::MalformedHeader("trailing bytes after last layer".into()).into());
    }
    let spec = ModelSpec {
        input_units,
        layers,
        dropout,
    };
    let mut model = Model::new(spec, 0)?;
    for (i, (layer, tensors)) in model.layers_mut().iter_mut().zip(blobs).enumerate() {
        let params = layer.params_mut();
        if params.len() != tensors.len() {
            return Err(FormatError::MalformedHeader(format!(
                "layer {i}: expected {} tensors, found {}",
                params.len(),
                tensors.len()
            ))
            .into());
        }
        for (p, (rows, cols, planes, data)) in params.into_iter().zip(tensors) {
            if p.shape() != (rows, cols) || p.algebra().dim() != planes {
                return Err(FormatError::MalformedHeader(format!(
                    "layer {i}: tensor {rows}x{cols}x{planes} does not match the layer shape"
                ))
                .into());
            }
            p.data_mut().copy_from_slice(&data);
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
