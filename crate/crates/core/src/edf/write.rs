//! Synthetic EDF/EDF+ writer.
//!
//! Exists to fabricate small, fully valid files for tests and demos; its
//! output round-trips exactly through the parser. Physical samples that lie
//! on a signal's digital grid (anything produced by
//! [`SignalSpec::digital_to_physical`]) survive write-then-parse bit for
//! bit, because quantization recovers the original integer.

use super::{tal, AnnotationEvent, EdfError, EdfHeader, Result, SignalSpec, ANNOTATION_LABEL};

/// Serializes a file from ordinary signals plus optional annotations.
///
/// `data[i]` holds signal `i`'s physical samples and must be a whole number
/// of records (the same count for every signal). When `events` is non-empty
/// an `EDF Annotations` channel is appended automatically, sized for the
/// largest record chunk; each event lands in the record covering its onset
/// (clamped to the last record, since TAL onsets are absolute anyway). The
/// header's `n_data_records` and `header_bytes` are recomputed, not trusted.
pub fn write_synthetic_edf(
    header: &EdfHeader,
    signals: &[SignalSpec],
    data: &[Vec<f64>],
    events: &[AnnotationEvent],
) -> Result<Vec<u8>> {
    if signals.iter().any(|s| s.is_annotation()) {
        return Err(EdfError::InvalidSignalSpec(
            "pass annotations through `events`, not as an explicit signal".into(),
        ));
    }
    if data.len() != signals.len() {
        return Err(EdfError::InvalidSignalSpec(format!(
            "{} signals but {} data vectors",
            signals.len(),
            data.len()
        )));
    }

    // Records implied by the data; an annotation-only file gets one record.
    let mut n_records: Option<usize> = None;
    for (spec, samples) in signals.iter().zip(data) {
        let spr = spec.samples_per_record;
        if spr == 0 || samples.len() % spr != 0 {
            return Err(EdfError::InvalidSignalSpec(format!(
                "signal {:?}: {} samples is not a whole number of {spr}-sample records",
                spec.label,
                samples.len()
            )));
        }
        let count = samples.len() / spr;
        if *n_records.get_or_insert(count) != count {
            return Err(EdfError::InvalidSignalSpec(
                "signals disagree on the record count".into(),
            ));
        }
    }
    let n_records = n_records.unwrap_or(usize::from(!events.is_empty()));
    if !signals.is_empty() && n_records > 0 && header.record_duration <= 0.0 {
        return Err(EdfError::InvalidHeaderValue(
            "record_duration must be positive when sample data is present".into(),
        ));
    }

    // Distribute events over records and encode the TAL chunks.
    let mut chunks: Vec<Vec<u8>> = Vec::new();
    let mut ann_spr = 0;
    if !events.is_empty() {
        chunks = vec![Vec::new(); n_records];
        for (r, chunk) in chunks.iter_mut().enumerate() {
            chunk.extend_from_slice(&tal::encode_timekeeping(
                r as f64 * header.record_duration,
            ));
        }
        for e in events {
            let r = if header.record_duration > 0.0 && e.onset_seconds > 0.0 {
                ((e.onset_seconds / header.record_duration) as usize).min(n_records - 1)
            } else {
                0
            };
            chunks[r].extend_from_slice(&tal::encode_tal(
                e.onset_seconds,
                e.duration_seconds,
                &[&e.text],
            ));
        }
        let max_bytes = chunks.iter().map(Vec::len).max().unwrap_or(0);
        ann_spr = max_bytes.div_ceil(2).max(1);
    }

    let mut all_specs: Vec<SignalSpec> = signals.to_vec();
    if !events.is_empty() {
        all_specs.push(SignalSpec {
            label: ANNOTATION_LABEL.into(),
            transducer: String::new(),
            physical_dimension: String::new(),
            physical_min: -1.0,
            physical_max: 1.0,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: ann_spr,
            reserved: String::new(),
        });
    }

    let mut out = encode_header(header, &all_specs, n_records)?;
    for r in 0..n_records {
        for (spec, samples) in signals.iter().zip(data) {
            let spr = spec.samples_per_record;
            for &p in &samples[r * spr..(r + 1) * spr] {
                let d = spec.physical_to_digital(p)? as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
        if !events.is_empty() {
            let mut chunk = std::mem::take(&mut chunks[r]);
            chunk.resize(ann_spr * 2, 0);
            out.extend_from_slice(&chunk);
        }
    }
    Ok(out)
}

fn encode_header(
    header: &EdfHeader,
    specs: &[SignalSpec],
    n_records: usize,
) -> Result<Vec<u8>> {
    let year = chrono::Datelike::year(&header.start_datetime.date());
    if !(1985..=2084).contains(&year) {
        return Err(EdfError::InvalidHeaderValue(format!(
            "start year {year} has no two-digit representation (1985..=2084)"
        )));
    }
    let reserved = if specs.iter().any(SignalSpec::is_annotation) && header.reserved.is_empty() {
        "EDF+C".to_string()
    } else {
        header.reserved.clone()
    };

    let mut out = Vec::with_capacity(256 * (1 + specs.len()));
    push_fixed(&mut out, "version", &header.version, 8)?;
    push_fixed(&mut out, "patient_info", &header.patient_info, 80)?;
    push_fixed(&mut out, "recording_info", &header.recording_info, 80)?;
    push_fixed(&mut out, "startdate", &header.start_datetime.format("%d.%m.%y").to_string(), 8)?;
    push_fixed(&mut out, "starttime", &header.start_datetime.format("%H.%M.%S").to_string(), 8)?;
    push_fixed(&mut out, "header_bytes", &(256 * (1 + specs.len())).to_string(), 8)?;
    push_fixed(&mut out, "reserved", &reserved, 44)?;
    push_fixed(&mut out, "n_data_records", &n_records.to_string(), 8)?;
    push_fixed(&mut out, "record_duration", &header.record_duration.to_string(), 8)?;
    push_fixed(&mut out, "n_signals", &specs.len().to_string(), 4)?;

    // Field-major signal descriptors.
    for s in specs {
        push_fixed(&mut out, "label", &s.label, 16)?;
    }
    for s in specs {
        push_fixed(&mut out, "transducer", &s.transducer, 80)?;
    }
    for s in specs {
        push_fixed(&mut out, "physical_dimension", &s.physical_dimension, 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "physical_min", &s.physical_min.to_string(), 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "physical_max", &s.physical_max.to_string(), 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "digital_min", &s.digital_min.to_string(), 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "digital_max", &s.digital_max.to_string(), 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "prefiltering", &s.prefiltering, 80)?;
    }
    for s in specs {
        push_fixed(&mut out, "samples_per_record", &s.samples_per_record.to_string(), 8)?;
    }
    for s in specs {
        push_fixed(&mut out, "reserved", &s.reserved, 32)?;
    }
    Ok(out)
}

/// Appends `value` left-justified in a `width`-byte, space-padded slot.
fn push_fixed(out: &mut Vec<u8>, field: &str, value: &str, width: usize) -> Result<()> {
    if !value.is_ascii() {
        return Err(EdfError::FieldTooWide(format!(
            "{field}: {value:?} contains non-ASCII characters"
        )));
    }
    if value.len() > width {
        return Err(EdfError::FieldTooWide(format!(
            "{field}: {value:?} is {} bytes, slot is {width}",
            value.len()
        )));
    }
    out.extend_from_slice(value.as_bytes());
    out.resize(out.len() + (width - value.len()), b' ');
    Ok(())
}
