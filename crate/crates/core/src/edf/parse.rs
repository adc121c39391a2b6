//! EDF header and sample parsing.

use super::{tal, AnnotationEvent, EdfError, EdfHeader, Result, SignalSpec};
use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

/// Widths of the ten field-major per-signal descriptor columns.
const SIGNAL_FIELD_WIDTHS: [usize; 10] = [16, 80, 8, 8, 8, 8, 8, 80, 8, 32];

/// Parses the fixed header and all signal descriptors.
///
/// Text fields are decoded lossily (EDF is ASCII; anything else is replaced)
/// and trimmed of the space padding the format requires. Numeric fields must
/// parse after trimming. The declared header size must equal
/// `256 * (1 + n_signals)`.
pub fn parse_header(bytes: &[u8]) -> Result<(EdfHeader, Vec<SignalSpec>)> {
    if bytes.len() < 256 {
        return Err(EdfError::TruncatedHeader { needed: 256, got: bytes.len() });
    }
    let text = |range: std::ops::Range<usize>| -> String {
        String::from_utf8_lossy(&bytes[range]).trim().to_string()
    };

    let version = text(0..8);
    let patient_info = text(8..88);
    let recording_info = text(88..168);
    let start_datetime = parse_datetime(&text(168..176), &text(176..184))?;
    let header_bytes = parse_num::<usize>("header_bytes", &text(184..192))?;
    let reserved = text(192..236);
    let n_data_records = parse_num::<i64>("n_data_records", &text(236..244))?;
    if n_data_records < -1 {
        return Err(EdfError::InvalidHeaderValue(format!(
            "n_data_records {n_data_records} (only -1 means unknown)"
        )));
    }
    let record_duration = parse_num::<f64>("record_duration", &text(244..252))?;
    if !record_duration.is_finite() || record_duration < 0.0 {
        return Err(EdfError::InvalidHeaderValue(format!(
            "record_duration {record_duration}"
        )));
    }
    let n_signals = parse_num::<usize>("n_signals", &text(252..256))?;

    let expected = 256 * (1 + n_signals);
    if header_bytes != expected {
        return Err(EdfError::InconsistentHeaderSize { declared: header_bytes, expected });
    }
    if bytes.len() < expected {
        return Err(EdfError::TruncatedHeader { needed: expected, got: bytes.len() });
    }

    // Signal descriptors are field-major: all labels first, then all
    // transducers, and so on through the ten columns.
    let mut columns: Vec<Vec<String>> = Vec::with_capacity(SIGNAL_FIELD_WIDTHS.len());
    let mut offset = 256;
    for width in SIGNAL_FIELD_WIDTHS {
        let mut col = Vec::with_capacity(n_signals);
        for s in 0..n_signals {
            col.push(text(offset + s * width..offset + (s + 1) * width));
        }
        offset += width * n_signals;
        columns.push(col);
    }

    let mut specs = Vec::with_capacity(n_signals);
    for s in 0..n_signals {
        let spec = SignalSpec {
            label: columns[0][s].clone(),
            transducer: columns[1][s].clone(),
            physical_dimension: columns[2][s].clone(),
            physical_min: parse_num("physical_min", &columns[3][s])?,
            physical_max: parse_num("physical_max", &columns[4][s])?,
            digital_min: parse_num("digital_min", &columns[5][s])?,
            digital_max: parse_num("digital_max", &columns[6][s])?,
            prefiltering: columns[7][s].clone(),
            samples_per_record: parse_num("samples_per_record", &columns[8][s])?,
            reserved: columns[9][s].clone(),
        };
        validate_spec(&spec)?;
        specs.push(spec);
    }

    Ok((
        EdfHeader {
            version,
            patient_info,
            recording_info,
            start_datetime,
            header_bytes,
            reserved,
            n_data_records,
            record_duration,
            n_signals,
        },
        specs,
    ))
}

fn validate_spec(spec: &SignalSpec) -> Result<()> {
    if spec.digital_min >= spec.digital_max {
        return Err(EdfError::InvalidSignalSpec(format!(
            "signal {:?}: digital range [{}, {}] is empty",
            spec.label, spec.digital_min, spec.digital_max
        )));
    }
    if spec.digital_min < i16::MIN as i32 || spec.digital_max > i16::MAX as i32 {
        return Err(EdfError::InvalidSignalSpec(format!(
            "signal {:?}: digital range [{}, {}] exceeds 16-bit samples",
            spec.label, spec.digital_min, spec.digital_max
        )));
    }
    if spec.physical_min == spec.physical_max
        || !spec.physical_min.is_finite()
        || !spec.physical_max.is_finite()
    {
        return Err(EdfError::InvalidSignalSpec(format!(
            "signal {:?}: physical range [{}, {}] is degenerate",
            spec.label, spec.physical_min, spec.physical_max
        )));
    }
    if spec.samples_per_record == 0 {
        return Err(EdfError::InvalidSignalSpec(format!(
            "signal {:?}: zero samples per record",
            spec.label
        )));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(field: &'static str, value: &str) -> Result<T> {
    value.parse().map_err(|_| EdfError::NonNumericField { field, value: value.to_string() })
}

/// Parses `dd.mm.yy` + `hh.mm.ss`. EDF's two-digit year pivots at 85:
/// 85..99 are the 1900s, 00..84 the 2000s.
fn parse_datetime(date: &str, time: &str) -> Result<NaiveDateTime> {
    let date_parts: Vec<&str> = date.split('.').collect();
    let time_parts: Vec<&str> = time.split('.').collect();
    if date_parts.len() != 3 {
        return Err(EdfError::NonNumericField { field: "startdate", value: date.to_string() });
    }
    if time_parts.len() != 3 {
        return Err(EdfError::NonNumericField { field: "starttime", value: time.to_string() });
    }
    let d: u32 = parse_num("startdate", date_parts[0])?;
    let m: u32 = parse_num("startdate", date_parts[1])?;
    let yy: i32 = parse_num("startdate", date_parts[2])?;
    let year = if yy >= 85 { 1900 + yy } else { 2000 + yy };
    let h: u32 = parse_num("starttime", time_parts[0])?;
    let min: u32 = parse_num("starttime", time_parts[1])?;
    let s: u32 = parse_num("starttime", time_parts[2])?;
    let date = NaiveDate::from_ymd_opt(year, m, d)
        .ok_or_else(|| EdfError::InvalidHeaderValue(format!("startdate {d:02}.{m:02}.{yy:02}")))?;
    let time = NaiveTime::from_hms_opt(h, min, s)
        .ok_or_else(|| EdfError::InvalidHeaderValue(format!("starttime {h:02}.{min:02}.{s:02}")))?;
    Ok(NaiveDateTime::new(date, time))
}

/// Bytes per data record.
pub fn record_size_bytes(specs: &[SignalSpec]) -> usize {
    specs.iter().map(|s| s.samples_per_record * 2).sum()
}

/// Number of data records actually available.
///
/// With a declared count the file must contain at least that many; with the
/// unknown marker (-1) the data area must divide evenly into whole records.
/// Either way, reading never extends past what the file holds.
pub fn effective_record_count(
    header: &EdfHeader,
    specs: &[SignalSpec],
    file_len: usize,
) -> Result<usize> {
    let rec_size = record_size_bytes(specs);
    if file_len < header.header_bytes {
        return Err(EdfError::TruncatedRecord(format!(
            "file is {file_len} bytes, shorter than the {}-byte header",
            header.header_bytes
        )));
    }
    let data_len = file_len - header.header_bytes;
    if header.n_data_records >= 0 {
        let declared = header.n_data_records as usize;
        if rec_size > 0 && declared * rec_size > data_len {
            return Err(EdfError::TruncatedRecord(format!(
                "{declared} records of {rec_size} bytes declared, only {data_len} data bytes present"
            )));
        }
        Ok(declared)
    } else {
        if rec_size == 0 {
            return Ok(0);
        }
        if data_len % rec_size != 0 {
            return Err(EdfError::TruncatedRecord(format!(
                "{data_len} data bytes is not a whole number of {rec_size}-byte records"
            )));
        }
        Ok(data_len / rec_size)
    }
}

fn signal_index(specs: &[SignalSpec], label: &str) -> Result<usize> {
    specs
        .iter()
        .position(|s| s.label == label)
        .ok_or_else(|| EdfError::UnknownLabel(label.to_string()))
}

/// Reads one signal across all records and converts it to physical units.
pub fn read_signal(
    bytes: &[u8],
    header: &EdfHeader,
    specs: &[SignalSpec],
    label: &str,
) -> Result<Vec<f64>> {
    let idx = signal_index(specs, label)?;
    let spec = &specs[idx];
    if spec.is_annotation() {
        return Err(EdfError::InvalidSignalSpec(format!(
            "{label:?} is an annotation channel; its bytes are TALs, not samples"
        )));
    }
    let n_records = effective_record_count(header, specs, bytes.len())?;
    let rec_size = record_size_bytes(specs);
    let pre: usize = specs[..idx].iter().map(|s| s.samples_per_record * 2).sum();
    let spr = spec.samples_per_record;

    let mut out = Vec::with_capacity(n_records * spr);
    for r in 0..n_records {
        let start = header.header_bytes + r * rec_size + pre;
        let raw = &bytes[start..start + spr * 2];
        for pair in raw.chunks_exact(2) {
            let d = i16::from_le_bytes([pair[0], pair[1]]);
            out.push(spec.digital_to_physical(d as i32));
        }
    }
    Ok(out)
}

/// Collects every annotation from every `EDF Annotations` signal, skipping
/// the empty-text timekeeping TALs, and returns them sorted by onset.
///
/// A file without an annotation signal yields an empty list; deciding
/// whether that is acceptable is the caller's business (the corpus loader
/// checks a PSG file and its companion hypnogram file and errors only when
/// both are bare).
pub fn parse_annotations(
    bytes: &[u8],
    header: &EdfHeader,
    specs: &[SignalSpec],
) -> Result<Vec<AnnotationEvent>> {
    let ann_indices: Vec<usize> =
        (0..specs.len()).filter(|&i| specs[i].is_annotation()).collect();
    if ann_indices.is_empty() {
        return Ok(Vec::new());
    }
    let n_records = effective_record_count(header, specs, bytes.len())?;
    let rec_size = record_size_bytes(specs);

    let mut events = Vec::new();
    for r in 0..n_records {
        for &idx in &ann_indices {
            let pre: usize = specs[..idx].iter().map(|s| s.samples_per_record * 2).sum();
            let start = header.header_bytes + r * rec_size + pre;
            let chunk = &bytes[start..start + specs[idx].samples_per_record * 2];
            tal::parse_chunk(chunk, &mut events)?;
        }
    }
    events.sort_by(|a, b| {
        a.onset_seconds.partial_cmp(&b.onset_seconds).expect("onsets are finite")
    });
    Ok(events)
}
