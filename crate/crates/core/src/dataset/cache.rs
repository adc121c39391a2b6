//! Deterministic binary container for prepared segments.
//!
//! Re-cutting segments from EDF on every run is slow, so the prepared set is
//! cached once. Layout (little endian throughout):
//!
//! ```text
//! magic                 8 bytes  "SSEGCACH"
//! format version        u32      currently 1
//! n_channels            u32
//! per channel           u32 length + UTF-8 channel label
//! samples_per_channel   u32
//! n_segments            u64
//! per segment           patient u32, night u32, epoch index u32, stage u8,
//!                       n_channels * samples_per_channel f64 samples
//! ```
//!
//! Segments are stored sorted by (patient, night, index) and the stage byte
//! only admits the five trainable classes, so encoding the same set always
//! produces the same bytes; a checksum of the file therefore identifies the
//! dataset exactly.

use super::{DatasetError, Result, Segment, StageLabel, SEGMENT_SAMPLES};
use std::fs;
use std::path::Path;

const MAGIC: [u8; 8] = *b"SSEGCACH";
const FORMAT_VERSION: u32 = 1;

/// Caps that keep a corrupt header from requesting absurd allocations.
const MAX_CHANNELS: u32 = 8;
const MAX_LABEL_BYTES: u32 = 256;
const MAX_SAMPLES_PER_CHANNEL: u32 = 1 << 20;

/// Serializes segments (all sharing the channel layout named by `labels`)
/// into the container format. `Excluded` segments are refused: the cache
/// holds exactly the trainable set.
pub fn encode_cache(labels: &[String], segments: &[Segment]) -> Result<Vec<u8>> {
    if labels.is_empty() || labels.len() > MAX_CHANNELS as usize {
        return Err(DatasetError::CacheFormat(format!(
            "cache needs 1..={MAX_CHANNELS} channel labels, got {}",
            labels.len()
        )));
    }
    for label in labels {
        if label.len() > MAX_LABEL_BYTES as usize {
            return Err(DatasetError::CacheFormat(format!(
                "channel label {label:?} exceeds {MAX_LABEL_BYTES} bytes"
            )));
        }
    }
    let n_channels = labels.len();
    let spc = match segments.first() {
        Some(s) => s.samples.dims2()?.1,
        None => SEGMENT_SAMPLES,
    };
    if spc == 0 || spc > MAX_SAMPLES_PER_CHANNEL as usize {
        return Err(DatasetError::CacheFormat(format!(
            "samples per channel {spc} outside 1..={MAX_SAMPLES_PER_CHANNEL}"
        )));
    }

    let mut order: Vec<&Segment> = segments.iter().collect();
    order.sort_by_key(|s| (s.patient_id, s.night, s.index));

    let mut out = Vec::with_capacity(64 + segments.len() * (13 + 8 * n_channels * spc));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n_channels as u32).to_le_bytes());
    for label in labels {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    out.extend_from_slice(&(spc as u32).to_le_bytes());
    out.extend_from_slice(&(order.len() as u64).to_le_bytes());

    for seg in order {
        let (ch, len) = seg.samples.dims2()?;
        if ch != n_channels || len != spc {
            return Err(DatasetError::Inconsistent(format!(
                "segment patient {} night {} index {} is [{ch}, {len}], cache is [{n_channels}, {spc}]",
                seg.patient_id, seg.night, seg.index
            )));
        }
        let stage = seg.label.class_index().ok_or_else(|| {
            DatasetError::CacheFormat(format!(
                "segment patient {} night {} index {} is Excluded; filter before caching",
                seg.patient_id, seg.night, seg.index
            ))
        })?;
        out.extend_from_slice(&seg.patient_id.to_le_bytes());
        out.extend_from_slice(&seg.night.to_le_bytes());
        out.extend_from_slice(&seg.index.to_le_bytes());
        out.push(stage as u8);
        for &v in seg.samples.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses container bytes back into channel labels and segments.
pub fn decode_cache(bytes: &[u8]) -> Result<(Vec<String>, Vec<Segment>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(DatasetError::CacheFormat("bad magic, not a segment cache".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::CacheVersion { found: version, expected: FORMAT_VERSION });
    }
    let n_channels = r.u32()?;
    if n_channels == 0 || n_channels > MAX_CHANNELS {
        return Err(DatasetError::CacheFormat(format!(
            "channel count {n_channels} outside 1..={MAX_CHANNELS}"
        )));
    }
    let mut labels = Vec::with_capacity(n_channels as usize);
    for _ in 0..n_channels {
        let len = r.u32()?;
        if len > MAX_LABEL_BYTES {
            return Err(DatasetError::CacheFormat(format!(
                "channel label length {len} exceeds {MAX_LABEL_BYTES}"
            )));
        }
        let raw = r.take(len as usize)?;
        let label = std::str::from_utf8(raw)
            .map_err(|_| DatasetError::CacheFormat("channel label is not UTF-8".into()))?;
        labels.push(label.to_string());
    }
    let spc = r.u32()?;
    if spc == 0 || spc > MAX_SAMPLES_PER_CHANNEL {
        return Err(DatasetError::CacheFormat(format!(
            "samples per channel {spc} outside 1..={MAX_SAMPLES_PER_CHANNEL}"
        )));
    }
    let n_segments = r.u64()?;

    let seg_bytes = 13usize + 8 * n_channels as usize * spc as usize;
    let remaining = bytes.len() - r.pos;
    let expected = (n_segments as usize).checked_mul(seg_bytes);
    if expected != Some(remaining) {
        return Err(DatasetError::CacheFormat(format!(
            "{n_segments} segments of {seg_bytes} bytes each do not fit the \
             {remaining} bytes after the header"
        )));
    }

    let mut segments = Vec::with_capacity(n_segments as usize);
    for _ in 0..n_segments {
        let patient_id = r.u32()?;
        let night = r.u32()?;
        let index = r.u32()?;
        let stage = r.take(1)?[0];
        let label = StageLabel::from_class_index(stage as usize)
            .ok_or(DatasetError::InvalidLabelByte(stage))?;
        let n = n_channels as usize * spc as usize;
        let mut data = Vec::with_capacity(n);
        for chunk in r.take(8 * n)?.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("chunk is 8 bytes")));
        }
        let samples = crate::nn::Tensor::new(vec![n_channels as usize, spc as usize], data)?;
        segments.push(Segment { patient_id, night, index, label, samples });
    }
    Ok((labels, segments))
}

/// Encodes and atomically writes (temp file + rename) a cache file.
pub fn write_cache(path: &Path, labels: &[String], segments: &[Segment]) -> Result<()> {
    let bytes = encode_cache(labels, segments)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("cache.tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads and decodes a cache file.
pub fn read_cache(path: &Path) -> Result<(Vec<String>, Vec<Segment>)> {
    decode_cache(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(DatasetError::CacheFormat(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("slice is 4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("slice is 8 bytes")))
    }
}
