//! Weight file format.
//!
//! A single little-endian binary blob: magic, format version, architecture
//! fields, the initialization seed, provenance (fold id and approach), the
//! named parameter tensors, and a trailing SHA-256 over everything before
//! it. The checksum makes silent corruption impossible to load; the version
//! field lets future revisions fail loudly instead of misparsing.

use super::{ModelError, ModelParams, ModelSpec, Provenance, Result};
use crate::nn::{Activation, Conv1d, Dense, Tensor};
use sha2::{Digest, Sha256};
use std::path::Path;

/// File magic, followed immediately by the format version.
pub const MAGIC: [u8; 8] = *b"SSCNWGT\0";
/// Format version this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

/// Serializes a model to its on-disk representation.
pub fn encode_model(model: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + model.count_params() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.spec.n_channels as u32).to_le_bytes());
    buf.extend_from_slice(&(model.spec.filters as u32).to_le_bytes());
    buf.extend_from_slice(&(model.spec.n_classes as u32).to_le_bytes());
    buf.extend_from_slice(&(model.spec.segment_samples as u32).to_le_bytes());
    buf.extend_from_slice(&model.spec.dropout_rate.to_le_bytes());
    buf.extend_from_slice(&(model.spec.conv_kernels.len() as u32).to_le_bytes());
    for &k in &model.spec.conv_kernels {
        buf.extend_from_slice(&(k as u32).to_le_bytes());
    }
    buf.extend_from_slice(&model.seed.to_le_bytes());
    let fold: i64 = model.provenance.fold_id.map_or(-1, |f| f as i64);
    buf.extend_from_slice(&fold.to_le_bytes());
    let approach = model.provenance.approach.as_deref().unwrap_or("");
    buf.extend_from_slice(&(approach.len() as u32).to_le_bytes());
    buf.extend_from_slice(approach.as_bytes());

    let tensors = model.param_tensors();
    let names = model.param_names();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in names.iter().zip(&tensors) {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Writes a model file, going through a sibling temp file plus rename so an
/// interrupted save never leaves a half-written file at the final path.
pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let bytes = encode_model(model);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<ModelParams> {
    decode_model(&std::fs::read(path)?)
}

/// Parses the on-disk representation.
pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(ModelError::CorruptFile(format!(
            "file is {} bytes, smaller than the fixed framing",
            bytes.len()
        )));
    }
    if bytes[..8] != MAGIC {
        return Err(ModelError::CorruptFile("bad magic; not a weight file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest[..] != *trailer {
        return Err(ModelError::CorruptFile("checksum mismatch".into()));
    }

    let mut cur = Cursor { buf: body, pos: 12 };
    let n_channels = cur.u32()? as usize;
    let filters = cur.u32()? as usize;
    let n_classes = cur.u32()? as usize;
    let segment_samples = cur.u32()? as usize;
    let dropout_rate = cur.f64()?;
    let n_kernels = cur.u32()? as usize;
    let mut conv_kernels = Vec::with_capacity(n_kernels);
    for _ in 0..n_kernels {
        conv_kernels.push(cur.u32()? as usize);
    }
    let seed = cur.u64()?;
    let fold = cur.i64()?;
    let approach = cur.string()?;

    let spec = ModelSpec::for_channels(n_channels)?;
    let stored = ModelSpec {
        n_channels,
        conv_kernels,
        filters,
        n_classes,
        segment_samples,
        dropout_rate,
    };
    if stored != spec {
        return Err(ModelError::ShapeMismatch(format!(
            "stored architecture {stored:?} differs from this build's {spec:?}"
        )));
    }

    let n_tensors = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let name = cur.string()?;
        let ndim = cur.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = cur.take(len * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data)
            .map_err(|e| ModelError::CorruptFile(format!("tensor {name}: {e}")))?;
        tensors.push((name, tensor));
    }
    if cur.pos != body.len() {
        return Err(ModelError::CorruptFile(format!(
            "{} trailing bytes after the last tensor",
            body.len() - cur.pos
        )));
    }

    let provenance = Provenance {
        fold_id: (fold >= 0).then(|| fold as u32),
        approach: (!approach.is_empty()).then_some(approach),
    };
    assemble(spec, tensors, seed, provenance)
}

/// Rebuilds the layer structs, validating names and shapes against [`ModelSpec`].
fn assemble(
    spec: ModelSpec,
    tensors: Vec<(String, Tensor)>,
    seed: u64,
    provenance: Provenance,
) -> Result<ModelParams> {
    let n_layers = spec.conv_kernels.len();
    if tensors.len() != 2 * n_layers + 2 {
        return Err(ModelError::ShapeMismatch(format!(
            "expected {} tensors, file holds {}",
            2 * n_layers + 2,
            tensors.len()
        )));
    }
    let mut it = tensors.into_iter();
    let mut expect = |want_name: String, want_shape: &[usize]| -> Result<Tensor> {
        let (name, t) = it.next().expect("tensor count checked above");
        if name != want_name {
            return Err(ModelError::CorruptFile(format!(
                "tensor name {name:?} where {want_name:?} was expected"
            )));
        }
        if t.shape() != want_shape {
            return Err(ModelError::ShapeMismatch(format!(
                "{want_name}: stored shape {:?}, expected {want_shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    };

    let mut convs = Vec::with_capacity(n_layers);
    let mut in_ch = spec.n_channels;
    for (i, &k) in spec.conv_kernels.iter().enumerate() {
        let kernel = expect(format!("conv{}.kernel", i + 1), &[spec.filters, in_ch, k])?;
        let bias = expect(format!("conv{}.bias", i + 1), &[spec.filters])?;
        convs.push(Conv1d::new(kernel, bias, Activation::Relu)?);
        in_ch = spec.filters;
    }
    let flat = spec.flatten_features();
    let weights = expect("dense.weights".into(), &[flat, spec.n_classes])?;
    let bias = expect("dense.bias".into(), &[spec.n_classes])?;
    let dense = Dense::new(weights, bias)?;
    Ok(ModelParams { spec, convs, dense, seed, provenance })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::CorruptFile(format!(
                "unexpected end of file at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| ModelError::CorruptFile("non-UTF-8 string field".into()))
    }
}
